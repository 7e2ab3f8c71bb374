//! The atomic action library.
//!
//! A library file is a JSON array of `{name, type, description, endpoint?}`
//! objects. `endpoint` is optional and defaults to the sim builtin of the same
//! name. Library values are immutable snapshots: registering an action returns
//! a new library with a bumped version.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::behavior::Behavior;
use crate::sim::builtins;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("malformed library file: {0}")]
    MalformedFile(String),
    #[error("library entry {entry}: missing field `{field}`")]
    MissingField { entry: String, field: String },
    #[error("duplicate action name `{0}`")]
    DuplicateName(String),
    #[error("unknown endpoint type `{0}` (expected action, service or code)")]
    UnknownEndpointType(String),
    #[error("unknown endpoint kind `{0}` (expected sim_builtin, http_bridge or dmp_skill)")]
    UnknownEndpointKind(String),
    #[error("invalid action name `{0}`: names must match [a-z0-9_]+")]
    InvalidName(String),
    #[error("action `{0}` has an empty description")]
    EmptyDescription(String),
    #[error("action `{name}` is bound to unknown sim builtin `{target}`")]
    UnknownBuiltinTarget { name: String, target: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which kind of endpoint an action is exposed as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointType {
    Action,
    Service,
    Code,
}

impl EndpointType {
    pub fn as_str(self) -> &'static str {
        match self {
            EndpointType::Action => "action",
            EndpointType::Service => "service",
            EndpointType::Code => "code",
        }
    }

    fn parse(raw: &str) -> Result<Self, RegistryError> {
        match raw {
            "action" => Ok(EndpointType::Action),
            "service" => Ok(EndpointType::Service),
            "code" => Ok(EndpointType::Code),
            other => Err(RegistryError::UnknownEndpointType(other.to_string())),
        }
    }
}

impl fmt::Display for EndpointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    SimBuiltin,
    HttpBridge,
    DmpSkill,
}

impl EndpointKind {
    fn parse(raw: &str) -> Result<Self, RegistryError> {
        match raw {
            "sim_builtin" => Ok(EndpointKind::SimBuiltin),
            "http_bridge" => Ok(EndpointKind::HttpBridge),
            "dmp_skill" => Ok(EndpointKind::DmpSkill),
            other => Err(RegistryError::UnknownEndpointKind(other.to_string())),
        }
    }
}

/// Where an action is actually executed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EndpointBinding {
    pub kind: EndpointKind,
    /// Builtin id, bridge URL or skill id depending on `kind`.
    pub target: String,
}

impl EndpointBinding {
    pub fn builtin(target: impl Into<String>) -> Self {
        Self {
            kind: EndpointKind::SimBuiltin,
            target: target.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicActionSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub endpoint_type: EndpointType,
    pub description: String,
    pub endpoint: EndpointBinding,
}

impl AtomicActionSpec {
    /// A sim-builtin action bound to the builtin of the same name.
    pub fn builtin(name: &str, endpoint_type: EndpointType, description: &str) -> Self {
        Self {
            name: name.to_string(),
            endpoint_type,
            description: description.to_string(),
            endpoint: EndpointBinding::builtin(name),
        }
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        if !is_valid_name(&self.name) {
            return Err(RegistryError::InvalidName(self.name.clone()));
        }
        if self.description.trim().is_empty() {
            return Err(RegistryError::EmptyDescription(self.name.clone()));
        }
        if self.endpoint.kind == EndpointKind::SimBuiltin && !builtins::is_builtin(&self.endpoint.target) {
            return Err(RegistryError::UnknownBuiltinTarget {
                name: self.name.clone(),
                target: self.endpoint.target.clone(),
            });
        }
        Ok(())
    }
}

pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Names referenced by a behavior that the library does not define.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub unknown: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.unknown.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLibrary {
    actions: Vec<AtomicActionSpec>,
    version: u64,
}

impl Default for ActionLibrary {
    fn default() -> Self {
        Self {
            actions: Vec::new(),
            version: 1,
        }
    }
}

const DEFAULT_LIBRARY: &str = include_str!("../assets/default_library.json");

impl ActionLibrary {
    pub fn new(actions: Vec<AtomicActionSpec>) -> Result<Self, RegistryError> {
        let mut seen = HashSet::new();
        for spec in &actions {
            spec.validate()?;
            if !seen.insert(spec.name.as_str()) {
                return Err(RegistryError::DuplicateName(spec.name.clone()));
            }
        }
        Ok(Self { actions, version: 1 })
    }

    /// The shipped library covering every sim builtin.
    pub fn builtin_default() -> Self {
        Self::from_json_str(DEFAULT_LIBRARY).expect("shipped default library is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, RegistryError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| RegistryError::MalformedFile(e.to_string()))?;
        let Value::Array(entries) = value else {
            return Err(RegistryError::MalformedFile("top level is not a JSON array".into()));
        };
        let actions = entries
            .iter()
            .enumerate()
            .map(|(i, entry)| parse_entry(i, entry))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(actions)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.actions).expect("library serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RegistryError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn actions(&self) -> &[AtomicActionSpec] {
        &self.actions
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&AtomicActionSpec> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// One `- <name> (<type>): <description>` line per action, in library order.
    pub fn render_description(&self) -> String {
        let mut out = String::new();
        for a in &self.actions {
            out.push_str(&format!("- {} ({}): {}\n", a.name, a.endpoint_type, a.description));
        }
        out
    }

    pub fn register(&self, spec: AtomicActionSpec) -> Result<Self, RegistryError> {
        spec.validate()?;
        if self.contains(&spec.name) {
            return Err(RegistryError::DuplicateName(spec.name));
        }
        let mut actions = self.actions.clone();
        actions.push(spec);
        Ok(Self {
            actions,
            version: self.version + 1,
        })
    }

    /// Restricts the library to the named actions, keeping library order.
    pub fn subset(&self, names: &[&str]) -> Self {
        Self {
            actions: self
                .actions
                .iter()
                .filter(|a| names.contains(&a.name.as_str()))
                .cloned()
                .collect(),
            version: self.version,
        }
    }

    pub fn validate_behavior_names(&self, behavior: &Behavior) -> ValidationReport {
        let mut unknown: Vec<String> = Vec::new();
        for name in behavior.action_names() {
            if !self.contains(name) && !unknown.iter().any(|u| u == name) {
                unknown.push(name.to_string());
            }
        }
        ValidationReport { unknown }
    }
}

fn parse_entry(index: usize, entry: &Value) -> Result<AtomicActionSpec, RegistryError> {
    let Value::Object(obj) = entry else {
        return Err(RegistryError::MalformedFile(format!("entry {index} is not an object")));
    };
    let label = obj
        .get("name")
        .and_then(Value::as_str)
        .map(|n| format!("`{n}`"))
        .unwrap_or_else(|| format!("#{index}"));
    let field = |key: &str| -> Result<&str, RegistryError> {
        match obj.get(key) {
            Some(Value::String(s)) => Ok(s.as_str()),
            Some(_) => Err(RegistryError::MalformedFile(format!(
                "entry {label}: field `{key}` must be a string"
            ))),
            None => Err(RegistryError::MissingField {
                entry: label.clone(),
                field: key.to_string(),
            }),
        }
    };
    let name = field("name")?.to_string();
    let endpoint_type = EndpointType::parse(field("type")?)?;
    let description = field("description")?.to_string();
    let endpoint = match obj.get("endpoint") {
        None | Some(Value::Null) => EndpointBinding::builtin(&name),
        Some(Value::Object(ep)) => parse_endpoint(&label, ep)?,
        Some(_) => {
            return Err(RegistryError::MalformedFile(format!(
                "entry {label}: `endpoint` must be an object"
            )))
        }
    };
    Ok(AtomicActionSpec {
        name,
        endpoint_type,
        description,
        endpoint,
    })
}

fn parse_endpoint(label: &str, ep: &Map<String, Value>) -> Result<EndpointBinding, RegistryError> {
    let get = |key: &str| {
        ep.get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| RegistryError::MissingField {
                entry: label.to_string(),
                field: format!("endpoint.{key}"),
            })
    };
    Ok(EndpointBinding {
        kind: EndpointKind::parse(get("kind")?)?,
        target: get("target")?.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::Step;

    const ONE: &str = r#"[{"name":"open_gripper","type":"service","description":"opens the parallel gripper; returns final width"}]"#;

    #[test]
    fn load_single_entry() {
        let lib = ActionLibrary::from_json_str(ONE).unwrap();
        assert_eq!(lib.len(), 1);
        assert_eq!(lib.version(), 1);
        assert_eq!(lib.actions()[0].endpoint, EndpointBinding::builtin("open_gripper"));
    }

    #[test]
    fn load_empty_array() {
        let lib = ActionLibrary::from_json_str("[]").unwrap();
        assert!(lib.is_empty());
        assert_eq!(lib.version(), 1);
        assert_eq!(lib.render_description(), "");
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = r#"[{"name":"pick_up","type":"action","description":"a"},
                       {"name":"pick_up","type":"action","description":"b"}]"#;
        match ActionLibrary::from_json_str(text) {
            Err(RegistryError::DuplicateName(n)) => assert_eq!(n, "pick_up"),
            other => panic!("expected DuplicateName, got {other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            ActionLibrary::from_json_str(r#"{"name":"x"}"#),
            Err(RegistryError::MalformedFile(_))
        ));
        assert!(matches!(
            ActionLibrary::from_json_str("not json"),
            Err(RegistryError::MalformedFile(_))
        ));
        match ActionLibrary::from_json_str(r#"[{"name":"pick_up","type":"action"}]"#) {
            Err(RegistryError::MissingField { entry, field }) => {
                assert_eq!(entry, "`pick_up`");
                assert_eq!(field, "description");
            }
            other => panic!("{other:?}"),
        }
        match ActionLibrary::from_json_str(r#"[{"name":"pick_up","type":"topic","description":"d"}]"#) {
            Err(RegistryError::UnknownEndpointType(t)) => assert_eq!(t, "topic"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ActionLibrary::from_json_str(r#"[{"name":"Pick Up","type":"action","description":"d"}]"#),
            Err(RegistryError::InvalidName(_))
        ));
        assert!(matches!(
            ActionLibrary::from_json_str(r#"[{"name":"teleport","type":"action","description":"d"}]"#),
            Err(RegistryError::UnknownBuiltinTarget { .. })
        ));
    }

    #[test]
    fn explicit_endpoint_binding() {
        let text = r#"[{"name":"wave","type":"action","description":"waves",
                        "endpoint":{"kind":"http_bridge","target":"http://127.0.0.1:9/wave"}}]"#;
        let lib = ActionLibrary::from_json_str(text).unwrap();
        assert_eq!(lib.actions()[0].endpoint.kind, EndpointKind::HttpBridge);
    }

    #[test]
    fn render_single_line() {
        let lib = ActionLibrary::from_json_str(ONE).unwrap();
        let expected = ["- ", "open_gripper", " (", "service", "): ", "opens the parallel gripper; returns final width", "\n"].concat();
        assert_eq!(lib.render_description(), expected);
    }

    #[test]
    fn render_preserves_order() {
        let lib = ActionLibrary::builtin_default().subset(&["pick_up", "home_arm", "drop_in_sink"]);
        let names: Vec<_> = lib
            .render_description()
            .lines()
            .map(|l| l[2..].split(' ').next().unwrap().to_string())
            .collect();
        let expected: Vec<_> = lib.actions().iter().map(|a| a.name.clone()).collect();
        assert_eq!(names.len(), 3);
        assert_eq!(names, expected);
    }

    #[test]
    fn register_grows_and_bumps_version() {
        let lib = ActionLibrary::default();
        let stir = AtomicActionSpec {
            name: "stir".into(),
            endpoint_type: EndpointType::Service,
            description: "stirring motion learned from demonstration".into(),
            endpoint: EndpointBinding {
                kind: EndpointKind::DmpSkill,
                target: "stir".into(),
            },
        };
        let grown = lib.register(stir.clone()).unwrap();
        assert_eq!(grown.len(), 1);
        assert_eq!(grown.version(), 2);
        assert!(grown.render_description().contains("- stir (service): stirring motion"));
        assert!(matches!(grown.register(stir), Err(RegistryError::DuplicateName(_))));
        // the original snapshot is untouched
        assert!(lib.is_empty());
    }

    #[test]
    fn validate_names() {
        let lib = ActionLibrary::builtin_default();
        let ok = Behavior::sequence(vec![Step::new("pick_up", "blue cube"), Step::new("place_on", "red cube")]);
        assert!(lib.validate_behavior_names(&ok).is_empty());
        let bad = Behavior::sequence(vec![Step::bare("teleport"), Step::bare("teleport"), Step::bare("home_arm")]);
        assert_eq!(lib.validate_behavior_names(&bad).unknown, vec!["teleport".to_string()]);
    }

    #[test]
    fn save_then_load_is_identity() {
        let lib = ActionLibrary::builtin_default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lib.json");
        lib.save(&path).unwrap();
        assert_eq!(ActionLibrary::load(&path).unwrap(), lib);
    }
}
