//! Execution environments: where a behavior's atomic actions actually run.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dmp::SkillStore;
use crate::registry::{ActionLibrary, EndpointKind};
use crate::sim::{PerturbationEvent, WorldState};
use crate::Flag;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub output: String,
    pub failure: Flag,
}

impl ActionOutcome {
    pub fn failed(output: impl Into<String>) -> Self {
        Self {
            output: output.into(),
            failure: Flag::Failure,
        }
    }
}

/// Something that can run one atomic action. Task failures are in-band.
pub trait Environment {
    fn execute(&mut self, name: &str, input: &str, prev_output: &str) -> ActionOutcome;

    /// The simulated world, when there is one.
    fn world(&self) -> Option<&WorldState> {
        None
    }
}

/// Timeout for `http_bridge` endpoints.
pub const DEFAULT_BRIDGE_TIMEOUT: Duration = Duration::from_secs(5);

/// Routes each library action to a sim builtin, a learned skill or an HTTP
/// bridge, and fires scheduled perturbations at their step.
#[derive(Debug, Clone)]
pub struct SimEnv {
    pub world: WorldState,
    pub library: ActionLibrary,
    pub skills: SkillStore,
    pub bridge_timeout: Duration,
    pending: Vec<PerturbationEvent>,
    applied: Vec<PerturbationEvent>,
    episode_step: u32,
}

impl SimEnv {
    pub fn new(world: WorldState, library: ActionLibrary, skills: SkillStore) -> Self {
        Self {
            world,
            library,
            skills,
            bridge_timeout: DEFAULT_BRIDGE_TIMEOUT,
            pending: Vec::new(),
            applied: Vec::new(),
            episode_step: 0,
        }
    }

    /// Arms events for the upcoming episode; each fires before step `at_step`.
    pub fn schedule(&mut self, events: impl IntoIterator<Item = PerturbationEvent>) {
        self.pending.extend(events);
    }

    pub fn begin_episode(&mut self) {
        self.episode_step = 0;
        self.applied.clear();
    }

    /// Perturbations applied so far this episode.
    pub fn applied(&self) -> &[PerturbationEvent] {
        &self.applied
    }

    /// Drops events whose step was never reached and returns them.
    pub fn end_episode(&mut self) -> Vec<PerturbationEvent> {
        std::mem::take(&mut self.pending)
    }

    fn fire_due(&mut self) {
        let step = self.episode_step;
        let (due, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|e| e.at_step.is_none_or(|s| s <= step));
        self.pending = rest;
        for event in due {
            // an event made invalid by earlier steps (object now held) is skipped
            if let Ok(next) = self.world.perturb(&event) {
                self.world = next;
                self.applied.push(event);
            }
        }
    }

    fn call_bridge(&self, url: &str, name: &str, input: &str, prev_output: &str) -> ActionOutcome {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.bridge_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = serde_json::json!({"name": name, "input": input, "prev_output": prev_output});
        let response = match agent.post(url).send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return ActionOutcome::failed("endpoint timeout"),
            Err(e) => return ActionOutcome::failed(format!("endpoint error: {e}")),
        };
        if !response.status().is_success() {
            return ActionOutcome::failed(format!("endpoint returned HTTP {}", response.status().as_u16()));
        }
        #[derive(Deserialize)]
        struct Reply {
            #[serde(default)]
            output: String,
            failure: Flag,
        }
        match response.into_body().read_json::<Reply>() {
            Ok(r) => ActionOutcome {
                output: r.output,
                failure: r.failure,
            },
            Err(ureq::Error::Timeout(_)) => ActionOutcome::failed("endpoint timeout"),
            Err(e) => ActionOutcome::failed(format!("malformed endpoint reply: {e}")),
        }
    }
}

impl Environment for SimEnv {
    fn execute(&mut self, name: &str, input: &str, prev_output: &str) -> ActionOutcome {
        self.fire_due();
        self.episode_step += 1;
        let Some(spec) = self.library.get(name) else {
            return ActionOutcome::failed(format!("{name} is not in the action library"));
        };
        let binding = spec.endpoint.clone();
        match binding.kind {
            EndpointKind::SimBuiltin => match self.world.execute_atomic(&binding.target, input, prev_output) {
                Ok(r) => {
                    self.world = r.state_after;
                    ActionOutcome {
                        output: r.output,
                        failure: r.failure,
                    }
                }
                Err(e) => ActionOutcome::failed(e.to_string()),
            },
            EndpointKind::DmpSkill => {
                let (output, failed) = self.skills.play(&binding.target);
                self.world.step_count += 1;
                if !failed {
                    self.world.performed_skills.push(name.to_string());
                }
                ActionOutcome {
                    output,
                    failure: Flag::from_failed(failed),
                }
            }
            EndpointKind::HttpBridge => {
                self.world.step_count += 1;
                self.call_bridge(&binding.target, name, input, prev_output)
            }
        }
    }

    fn world(&self) -> Option<&WorldState> {
        Some(&self.world)
    }
}
