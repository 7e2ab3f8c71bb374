use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorMode;
use crate::engine::StepResult;
use crate::gateway::GatewayError;
use crate::parser::ParseError;
use crate::sim::PerturbationEvent;
use crate::Flag;

/// Called synchronously for every event, in order.
pub type EventListener = Arc<dyn Fn(&SessionEvent) + Send + Sync>;

/// Ids start at 1 and increase by one per event within a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub id: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    TaskSet {
        text: String,
    },
    PromptBuilt {
        tau: u32,
        world_version: u64,
        feedback_count: usize,
        prompt_hash: String,
    },
    LlmResponse {
        tau: u32,
        text: String,
        latency_ms: u64,
        backend_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<GatewayError>,
    },
    BehaviorParsed {
        tau: u32,
        mode: Option<BehaviorMode>,
        actions: Vec<String>,
        unknown: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<ParseError>,
    },
    StepExecuted {
        tau: u32,
        step: StepResult,
    },
    EpisodeDone {
        tau: u32,
        failure: Flag,
        return_contribution: f64,
        ledger_value: f64,
        goal_satisfied: Option<bool>,
    },
    /// `tau` and `at_step` are absent when applied to an idle world.
    Perturbation {
        tau: Option<u32>,
        at_step: Option<u32>,
        event: PerturbationEvent,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::TaskSet { .. } => "task_set",
            EventKind::PromptBuilt { .. } => "prompt_built",
            EventKind::LlmResponse { .. } => "llm_response",
            EventKind::BehaviorParsed { .. } => "behavior_parsed",
            EventKind::StepExecuted { .. } => "step_executed",
            EventKind::EpisodeDone { .. } => "episode_done",
            EventKind::Perturbation { .. } => "perturbation",
        }
    }
}

#[derive(Default)]
pub(super) struct EventBus {
    pub events: Vec<SessionEvent>,
    pub listener: Option<EventListener>,
}

impl EventBus {
    pub fn emit(&mut self, kind: EventKind) {
        let event = SessionEvent {
            id: self.events.len() as u64 + 1,
            kind,
        };
        if let Some(l) = &self.listener {
            l(&event);
        }
        self.events.push(event);
    }
}
