//! Turns a world state into the observation text placed in the prompt.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sim::{Location, ScenarioKind, WorldState, Zone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    Gripper,
    Objects,
    DoorsMachine,
    Arm,
    CustomTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObserverSpec {
    pub name: String,
    pub kind: ObserverKind,
    /// Text with `{placeholder}`s; only for `custom_template`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
}

impl ObserverSpec {
    pub fn new(name: &str, kind: ObserverKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            template: None,
        }
    }

    pub fn template(name: &str, template: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ObserverKind::CustomTemplate,
            template: Some(template.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ObservationError {
    #[error("observer config is empty")]
    EmptyConfig,
    #[error("duplicate observer `{0}`")]
    DuplicateObserver(String),
    #[error("custom observer `{0}` has no template")]
    MissingTemplate(String),
    #[error("bad observer config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObserverSet {
    observers: Vec<ObserverSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub lines: Vec<String>,
    /// `step_count` of the state this was taken from.
    pub world_version: u64,
}

impl Observation {
    pub fn text(&self) -> String {
        self.lines.join("\n")
    }
}

/// An observer that cannot produce its lines.
struct Unavailable;

impl ObserverSet {
    pub fn register(config: Vec<ObserverSpec>) -> Result<Self, ObservationError> {
        if config.is_empty() {
            return Err(ObservationError::EmptyConfig);
        }
        let mut seen = HashSet::new();
        for spec in &config {
            if !seen.insert(spec.name.as_str()) {
                return Err(ObservationError::DuplicateObserver(spec.name.clone()));
            }
            if spec.kind == ObserverKind::CustomTemplate && spec.template.is_none() {
                return Err(ObservationError::MissingTemplate(spec.name.clone()));
            }
        }
        Ok(Self { observers: config })
    }

    /// Gripper, objects, doors/machine (kitchen scenes only) and arm.
    pub fn default_for(scenario: ScenarioKind) -> Self {
        let mut config = vec![
            ObserverSpec::new("gripper", ObserverKind::Gripper),
            ObserverSpec::new("objects", ObserverKind::Objects),
        ];
        if matches!(scenario, ScenarioKind::Coffee | ScenarioKind::Pasta) {
            config.push(ObserverSpec::new("doors_machine", ObserverKind::DoorsMachine));
        }
        config.push(ObserverSpec::new("arm", ObserverKind::Arm));
        Self::register(config).expect("static config is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self, ObservationError> {
        let config: Vec<ObserverSpec> =
            serde_json::from_str(text).map_err(|e| ObservationError::BadConfig(e.to_string()))?;
        Self::register(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ObservationError> {
        let text = std::fs::read_to_string(path).map_err(|e| ObservationError::BadConfig(e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn observers(&self) -> &[ObserverSpec] {
        &self.observers
    }

    pub fn len(&self) -> usize {
        self.observers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observers.is_empty()
    }

    pub fn collect(&self, state: &WorldState) -> Observation {
        let mut lines = Vec::new();
        for spec in &self.observers {
            match observe(spec, state) {
                Ok(mut l) => lines.append(&mut l),
                Err(Unavailable) => lines.push(format!("{}: unavailable", spec.name)),
            }
        }
        Observation {
            lines,
            world_version: state.step_count,
        }
    }
}

pub fn collect_observation(set: &ObserverSet, state: &WorldState) -> Observation {
    set.collect(state)
}

fn open_closed(open: bool) -> &'static str {
    if open {
        "open"
    } else {
        "closed"
    }
}

fn observe(spec: &ObserverSpec, w: &WorldState) -> Result<Vec<String>, Unavailable> {
    Ok(match spec.kind {
        ObserverKind::Gripper => vec![match w.held_object() {
            Some(o) => format!("the gripper is closed holding {}", o.descriptor()),
            None => format!("the gripper is {}", open_closed(w.gripper.open)),
        }],
        ObserverKind::Objects => w
            .objects
            .values()
            .filter_map(|o| match &o.location {
                Location::Zone(z) => Some(format!("the {} is in zone {z}", o.descriptor())),
                Location::OnTopOf(t) => Some(format!("the {} is on the {}", o.descriptor(), w.descriptor(t))),
                Location::Held => None,
            })
            .collect(),
        ObserverKind::DoorsMachine => vec![
            format!("the cabinet door is {}", open_closed(w.cabinet_door_open)),
            format!("the machine cover is {}", open_closed(w.machine_cover_open)),
            format!("the coffee machine is {}", if w.machine_on { "on" } else { "off" }),
        ],
        ObserverKind::Arm => match &w.grid {
            Some(g) => {
                let mut lines = vec![format!(
                    "the gripper is at cell ({}, {}, {})",
                    g.gripper.x, g.gripper.y, g.gripper.z
                )];
                for (id, c) in &g.object_cells {
                    lines.push(format!("the {} is at cell ({}, {}, {})", w.descriptor(id), c.x, c.y, c.z));
                }
                lines.push(format!(
                    "the bowl is at cell ({}, {}, 0); the white area is at cell ({}, {}, 0)",
                    g.bowl_cell.x, g.bowl_cell.y, g.white_cell.x, g.white_cell.y
                ));
                lines
            }
            None if w.arm_zone == Zone::Home => vec!["the arm is at home".to_string()],
            None => vec![format!("the arm is above zone {}", w.arm_zone)],
        },
        ObserverKind::CustomTemplate => vec![render_template(spec.template.as_deref().ok_or(Unavailable)?, w)?],
    })
}

fn placeholder(name: &str, w: &WorldState) -> Option<String> {
    if let Some(zone) = name.strip_suffix("_count") {
        if zone == "object" {
            return Some(w.objects.len().to_string());
        }
        let zone: Zone = zone.parse().ok()?;
        return Some(w.objects_in_zone(zone).count().to_string());
    }
    Some(match name {
        "held" => w.held_object().map_or("nothing".to_string(), |o| o.descriptor()),
        "arm_zone" => w.arm_zone.to_string(),
        "gripper_width" => format!("{}", w.gripper.width_mm),
        "step_count" => w.step_count.to_string(),
        _ => return None,
    })
}

fn render_template(template: &str, w: &WorldState) -> Result<String, Unavailable> {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('}').ok_or(Unavailable)? + open;
        out.push_str(&placeholder(&rest[open + 1..close], w).ok_or(Unavailable)?);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Scenario;

    fn world() -> WorldState {
        Scenario::tabletop(2, 9).reset().unwrap()
    }

    #[test]
    fn register_rules() {
        let set = ObserverSet::register(vec![
            ObserverSpec::new("gripper", ObserverKind::Gripper),
            ObserverSpec::new("objects", ObserverKind::Objects),
        ])
        .unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.observers()[0].name, "gripper");
        assert_eq!(
            ObserverSet::register(vec![
                ObserverSpec::new("a", ObserverKind::Gripper),
                ObserverSpec::new("a", ObserverKind::Arm)
            ]),
            Err(ObservationError::DuplicateObserver("a".into()))
        );
        assert_eq!(ObserverSet::register(vec![]), Err(ObservationError::EmptyConfig));
    }

    #[test]
    fn tabletop_lines() {
        let w = world();
        let obs = ObserverSet::default_for(ScenarioKind::Tabletop).collect(&w);
        assert_eq!(obs.lines[0], "the gripper is open");
        assert_eq!(obs.lines.iter().filter(|l| l.contains(" cube is ")).count(), 2);
        assert_eq!(obs, ObserverSet::default_for(ScenarioKind::Tabletop).collect(&w));
        assert_eq!(obs.world_version, 0);
    }

    #[test]
    fn held_object_reported_by_gripper_only() {
        let w = world();
        let desc = w.descriptor("box1");
        let w = w.execute_atomic("locate_object", &desc, "").unwrap().state_after;
        let w = w.execute_atomic("pick_up", &desc, "").unwrap().state_after;
        let obs = ObserverSet::default_for(ScenarioKind::Tabletop).collect(&w);
        assert_eq!(obs.lines[0], format!("the gripper is closed holding {desc}"));
        assert!(!obs.lines[1..].iter().any(|l| l.contains(&desc)));
    }

    #[test]
    fn custom_template() {
        let mut w = world();
        for o in w.objects.values_mut() {
            o.location = Location::Zone(Zone::Sink);
        }
        let set = ObserverSet::register(vec![
            ObserverSpec::template("sink", "sink contains {sink_count} objects"),
            ObserverSpec::template("broken", "{no_such_thing}"),
        ])
        .unwrap();
        let obs = set.collect(&w);
        assert_eq!(obs.lines, vec!["sink contains 2 objects", "broken: unavailable"]);
    }
}
