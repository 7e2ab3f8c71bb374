//! Deterministic tabletop / kitchen simulator.

pub mod builtins;
pub mod grid;
mod scenario;
mod task;
mod world;

use serde::{Deserialize, Serialize};

pub use builtins::{is_builtin, ActionResult, BUILTINS, SUPERVISORY_BUILTINS};
pub use grid::{Cell, Direction, GridState};
pub use scenario::Scenario;
pub use task::{
    goal_satisfied, ground_truth_plan, oracle_plan, oracle_plan_from, parse_instruction, GoalClause, PlanOptions, TaskSpec, WorldFlag, PASTA_SKILLS,
};
pub use world::{
    Color, CoffeeState, GripperState, Location, ObjectKind, ScenarioKind, SceneObject, WorldState, Zone,
    GRIPPER_MAX_WIDTH_MM,
};

pub(crate) use world::tokenize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("tabletop scenes hold 2 to 8 boxes, got {0}")]
    InvalidBoxCount(usize),
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("object `{0}` is held and cannot be moved")]
    ObjectHeld(String),
    #[error("invalid location: {0}")]
    InvalidLocation(String),
    #[error("no oracle plan for task `{0}`")]
    UnknownTask(String),
}

/// Someone moves an object behind the robot's back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationEvent {
    /// Fire before this step of the next episode; `None` applies immediately.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_step: Option<u32>,
    pub object_id: String,
    pub new_location: Location,
}

impl PerturbationEvent {
    pub fn now(object_id: impl Into<String>, new_location: Location) -> Self {
        Self {
            at_step: None,
            object_id: object_id.into(),
            new_location,
        }
    }

    pub fn at(step: u32, object_id: impl Into<String>, new_location: Location) -> Self {
        Self {
            at_step: Some(step),
            object_id: object_id.into(),
            new_location,
        }
    }
}

impl WorldState {
    /// Relocates an object (and whatever is stacked on it). The robot's
    /// beliefs are left alone: that is the point of a perturbation.
    pub fn perturb(&self, event: &PerturbationEvent) -> Result<WorldState, SimError> {
        self.check_perturbation(event)?;
        let mut next = self.clone();
        next.objects
            .get_mut(&event.object_id)
            .expect("checked")
            .location = event.new_location.clone();
        next.step_count += 1;
        Ok(next)
    }

    /// Validates a perturbation without applying it.
    pub fn check_perturbation(&self, event: &PerturbationEvent) -> Result<(), SimError> {
        let id = event.object_id.as_str();
        let obj = self
            .objects
            .get(id)
            .ok_or_else(|| SimError::UnknownObject(id.to_string()))?;
        if obj.location == Location::Held {
            return Err(SimError::ObjectHeld(id.to_string()));
        }
        if self.grid.is_some() {
            return Err(SimError::InvalidLocation(
                "objects on the movement grid cannot be relocated".into(),
            ));
        }
        match &event.new_location {
            Location::Held => Err(SimError::InvalidLocation("cannot put an object into the gripper".into())),
            Location::Zone(Zone::Home) => Err(SimError::InvalidLocation("home is not a surface".into())),
            Location::Zone(_) => Ok(()),
            Location::OnTopOf(target) => {
                if !self.objects.contains_key(target) {
                    return Err(SimError::UnknownObject(target.clone()));
                }
                if target == id || self.stack_contains(id, target) {
                    return Err(SimError::InvalidLocation(format!("{id} cannot go on {target}: stacking cycle")));
                }
                if self.root_zone(target).is_none() {
                    return Err(SimError::InvalidLocation(format!("{target} is held")));
                }
                if self.objects_on(target).any(|o| o.id != id) {
                    return Err(SimError::InvalidLocation(format!("{target} is covered")));
                }
                Ok(())
            }
        }
    }

    /// True when `other` sits somewhere above `base` in its stack.
    fn stack_contains(&self, base: &str, other: &str) -> bool {
        let mut cursor = other;
        for _ in 0..=self.objects.len() {
            match self.objects.get(cursor).map(|o| &o.location) {
                Some(Location::OnTopOf(below)) if below == base => return true,
                Some(Location::OnTopOf(below)) => cursor = below,
                _ => return false,
            }
        }
        false
    }
}
