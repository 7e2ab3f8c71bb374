use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DmpError, DmpModel};
use crate::registry::{ActionLibrary, AtomicActionSpec, EndpointBinding, EndpointKind, EndpointType};

/// Largest absolute coordinate a skill rollout may reach.
pub const WORKSPACE_LIMIT: f64 = 2.0;

/// Learned skills by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkillStore {
    pub skills: BTreeMap<String, DmpModel>,
}

impl SkillStore {
    pub fn get(&self, id: &str) -> Option<&DmpModel> {
        self.skills.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.skills.contains_key(id)
    }

    /// Plays a skill as one atomic step. Returns the output text and whether
    /// the motion left the workspace.
    pub fn play(&self, id: &str) -> (String, bool) {
        let Some(model) = self.skills.get(id) else {
            return (format!("skill {id} is not in the skill store"), true);
        };
        let dt = model.duration / 100.0;
        match model.rollout(dt, 1.0) {
            Ok(r) => {
                let peak = r.positions.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                if peak > WORKSPACE_LIMIT || !peak.is_finite() {
                    (format!("{id} left the workspace (|y| reached {peak:.3})"), true)
                } else {
                    (format!("performed {id}"), false)
                }
            }
            Err(e) => (format!("{id} could not be played: {e}"), true),
        }
    }
}

/// `"Stirring the pot contents"` becomes `stirring_the_pot_contents`.
pub fn skill_name(description: &str) -> String {
    let mut out = String::new();
    for c in description.trim().chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("skill");
    }
    out
}

/// Stores the model and adds a `dmp_skill` entry whose description is the
/// demonstrator's text verbatim. Name collisions get `_2`, `_3`, ...
pub fn register_skill(
    store: &mut SkillStore,
    model: DmpModel,
    description: &str,
    lib: &ActionLibrary,
) -> Result<(ActionLibrary, String), DmpError> {
    if description.trim().is_empty() {
        return Err(DmpError::EmptyDescription);
    }
    let base = skill_name(description);
    let mut name = base.clone();
    let mut n = 2;
    while lib.contains(&name) || store.contains(&name) {
        name = format!("{base}_{n}");
        n += 1;
    }
    let spec = AtomicActionSpec {
        name: name.clone(),
        endpoint_type: EndpointType::Action,
        description: description.to_string(),
        endpoint: EndpointBinding {
            kind: EndpointKind::DmpSkill,
            target: name.clone(),
        },
    };
    let next = lib.register(spec).map_err(|e| DmpError::Registry(e.to_string()))?;
    store.skills.insert(name.clone(), model);
    Ok((next, name))
}
