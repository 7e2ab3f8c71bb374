//! Desk-scale experiment harness: generated tabletop tasks, success-rate
//! sweeps, the paraphrase corpus and the long-horizon coffee run.

mod run;
mod sensitivity;
mod tasks;

use serde::{Deserialize, Serialize};

use crate::parser::OutputMode;
use crate::session::{Session, SessionConfig, SessionError};
use crate::sim::{Scenario, TaskSpec, Zone};
use crate::{ExecutionTrace, Flag};

pub use run::{
    classify, judge, run_benchmark, scripted_feedback, summarize, write_csv, BenchOptions, BenchResult, BenchSummary,
    Condition, FailureCause, FeedbackPolicy, SizeSummary,
};
pub use sensitivity::{corpus, run_sensitivity_corpus, PairResult, ParaphrasePair, SensitivityReport};
pub use tasks::generate_tasks;

/// The frozen 35-task fixture (sizes 2 to 8, 5 per size, seed 42).
pub fn frozen_tasks() -> Vec<TaskSpec> {
    serde_json::from_str(include_str!("../../fixtures/tasks_seed42.json")).expect("fixture parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoffeeReport {
    pub failure: Flag,
    pub steps: Vec<String>,
    pub machine_on: bool,
    pub mug_inserted: bool,
    pub cabinet_door_closed: bool,
    pub cover_closed: bool,
    pub ledger_value: f64,
    pub trace: Option<ExecutionTrace>,
}

impl CoffeeReport {
    pub fn passed(&self) -> bool {
        self.failure == Flag::Success
            && self.machine_on
            && self.mug_inserted
            && self.cabinet_door_closed
            && self.cover_closed
    }
}

/// "can you make me a coffee" through a full session with the oracle gateway.
pub fn run_coffee(mode: OutputMode) -> Result<CoffeeReport, SessionError> {
    let cfg = SessionConfig::new(Scenario::Coffee, crate::gateway::GatewayConfig::oracle()).with_mode(mode);
    let mut s = Session::create_with_id("coffee", cfg)?;
    let ep = s.submit_message(&TaskSpec::coffee().instruction)?;
    let w = s.world();
    Ok(CoffeeReport {
        failure: ep.failure,
        steps: ep
            .trace
            .iter()
            .flat_map(|t| &t.steps)
            .map(|st| format!("{}({})", st.action, st.input))
            .collect(),
        machine_on: w.machine_on,
        mug_inserted: w.root_zone("mug") == Some(Zone::Machine),
        cabinet_door_closed: !w.cabinet_door_open,
        cover_closed: !w.machine_cover_open,
        ledger_value: s.ledger().value,
        trace: ep.trace,
    })
}
