//! Behavior executors, traces and the return function.

mod run;

use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorMode;
use crate::sim::WorldState;
use crate::Flag;

pub use run::{run_behavior, run_behavior_observed, run_fsm, run_sequence, run_tree, FSM_STEP_CAP, TREE_LEAF_CAP};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("behavior references actions missing from the library: {0:?}")]
    UnvalidatedBehavior(Vec<String>),
    #[error("expected a {expected:?} behavior, got {actual:?}")]
    WrongMode { expected: BehaviorMode, actual: BehaviorMode },
    #[error("tree fails its structural checks: {0}")]
    MalformedTree(String),
    #[error("state machine fails its structural checks: {0}")]
    MalformedFsm(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub index: usize,
    pub action: String,
    pub input: String,
    pub prev_output: String,
    pub output: String,
    pub failure: Flag,
    /// Child indices from the tree root (`0/2`) or the FSM state id; empty for sequences.
    #[serde(default)]
    pub node_path: String,
}

impl StepResult {
    /// Everything except `node_path`, for comparing executors.
    pub fn effect(&self) -> (usize, &str, &str, &str, &str, Flag) {
        (self.index, &self.action, &self.input, &self.prev_output, &self.output, self.failure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapExceeded {
    TickBudgetExhausted,
    StepCapExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub mode: BehaviorMode,
    pub steps: Vec<StepResult>,
    pub behavior_failure: Flag,
    /// Index of the step that stopped a sequence.
    pub aborted_at: Option<usize>,
    pub cap_exceeded: Option<CapExceeded>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_before: Option<WorldState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_after: Option<WorldState>,
}

impl ExecutionTrace {
    /// The per-step effects, ignoring where in the behavior each step came from.
    pub fn effects(&self) -> Vec<(usize, &str, &str, &str, &str, Flag)> {
        self.steps.iter().map(StepResult::effect).collect()
    }

    pub fn action_names(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.action.as_str()).collect()
    }

    /// One JSON line per step followed by a summary record. `tau` is the
    /// behavior's position in the session, used for its return contribution.
    pub fn to_jsonl(&self, tau: u32, beta: f64) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("plain struct"));
            out.push('\n');
        }
        let atomic_flags: Vec<u8> = self.steps.iter().map(|s| s.failure.as_u8()).collect();
        let summary = serde_json::json!({
            "summary": true,
            "behavior_failure": self.behavior_failure,
            "return_contrib": return_term(tau, self.behavior_failure, beta),
            // per-atomic-step reading of the return, diagnostic only
            "atomic_return": compute_return(&atomic_flags, beta).ok(),
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReturnError {
    #[error("beta must lie in (0, 1], got {0}")]
    BadBeta(f64),
    #[error("flag {index} is {value}, expected 0 or 1")]
    BadFlag { index: usize, value: u8 },
}

fn check_beta(beta: f64) -> Result<(), ReturnError> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(ReturnError::BadBeta(beta))
    }
}

fn return_term(tau: u32, flag: Flag, beta: f64) -> f64 {
    -beta.powi(tau as i32) * (1.0 + f64::from(flag.as_u8()))
}

/// `sum_{tau=0}^{n-1} -beta^tau * (1 + f_tau)`; the empty sum is 0.
pub fn compute_return(flags: &[u8], beta: f64) -> Result<f64, ReturnError> {
    check_beta(beta)?;
    let mut total = 0.0;
    for (index, &value) in flags.iter().enumerate() {
        let flag = Flag::try_from(value).map_err(|_| ReturnError::BadFlag { index, value })?;
        total += return_term(index as u32, flag, beta);
    }
    Ok(total)
}

/// Running return over the behaviors executed in a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnLedger {
    pub beta: f64,
    pub entries: Vec<(u32, Flag)>,
    pub value: f64,
}

impl ReturnLedger {
    pub fn new(beta: f64) -> Result<Self, ReturnError> {
        check_beta(beta)?;
        Ok(Self {
            beta,
            entries: Vec::new(),
            value: 0.0,
        })
    }

    /// Records the next behavior's flag and returns its contribution.
    pub fn push(&mut self, flag: Flag) -> f64 {
        let tau = self.entries.len() as u32;
        let term = return_term(tau, flag, self.beta);
        self.entries.push((tau, flag));
        self.value += term;
        term
    }

    pub fn flags(&self) -> Vec<u8> {
        self.entries.iter().map(|(_, f)| f.as_u8()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_cases() {
        assert_eq!(compute_return(&[0, 0], 1.0), Ok(-2.0));
        assert_eq!(compute_return(&[0, 1], 0.5), Ok(-2.0));
        assert_eq!(compute_return(&[], 0.3), Ok(0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(compute_return(&[0], 0.0), Err(ReturnError::BadBeta(0.0)));
        assert_eq!(compute_return(&[0], 1.5), Err(ReturnError::BadBeta(1.5)));
        assert!(matches!(compute_return(&[0], f64::NAN), Err(ReturnError::BadBeta(_))));
        assert_eq!(compute_return(&[0, 2], 1.0), Err(ReturnError::BadFlag { index: 1, value: 2 }));
    }

    #[test]
    fn ledger_matches_compute_return() {
        let mut ledger = ReturnLedger::new(0.9).unwrap();
        for f in [Flag::Failure, Flag::Success, Flag::Failure, Flag::Success] {
            ledger.push(f);
        }
        assert_eq!(ledger.value, compute_return(&ledger.flags(), 0.9).unwrap());
    }
}
