//! Success-rate sweeps with and without scripted corrective feedback.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::behavior::SequenceSteps;
use crate::gateway::GatewayConfig;
use crate::parser::OutputMode;
use crate::session::{EpisodeRecord, Session, SessionConfig, SessionError};
use crate::sim::{oracle_plan, TaskSpec, WorldState};
use crate::Flag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackPolicy {
    None,
    Scripted,
}

impl std::str::FromStr for FeedbackPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "scripted" => Ok(Self::Scripted),
            _ => Err(format!("unknown feedback policy `{s}` (none|scripted)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    NoFeedback,
    WithFeedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    Parse,
    UnknownAction,
    WrongOrder,
    WrongTarget,
    EnvFailure,
}

impl FailureCause {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureCause::Parse => "parse",
            FailureCause::UnknownAction => "unknown_action",
            FailureCause::WrongOrder => "wrong_order",
            FailureCause::WrongTarget => "wrong_target",
            FailureCause::EnvFailure => "env_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub task_id: String,
    pub n_boxes: usize,
    pub condition: Condition,
    pub attempt_1_success: bool,
    /// Only under the scripted policy, and only after a failed first attempt.
    pub attempt_2_success: Option<bool>,
    /// Atomic steps executed over all attempts.
    pub steps: usize,
    pub cause_1: Option<FailureCause>,
    pub cause_2: Option<FailureCause>,
    pub feedback: Option<String>,
    pub wall_ms: u64,
}

impl BenchResult {
    pub fn success(&self) -> bool {
        self.attempt_1_success || self.attempt_2_success == Some(true)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub tasks: usize,
    pub no_feedback_successes: usize,
    /// Present when the scripted policy ran.
    pub with_feedback_successes: Option<usize>,
}

impl SizeSummary {
    pub fn no_feedback_rate(&self) -> f64 {
        self.no_feedback_successes as f64 / self.tasks.max(1) as f64
    }

    pub fn with_feedback_rate(&self) -> Option<f64> {
        Some(self.with_feedback_successes? as f64 / self.tasks.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub results: Vec<BenchResult>,
    pub per_size: BTreeMap<usize, SizeSummary>,
}

impl BenchSummary {
    pub fn total_successes(&self) -> usize {
        self.results.iter().filter(|r| r.success()).count()
    }

    /// With feedback never does worse than without, for every size.
    pub fn feedback_monotone(&self) -> bool {
        self.per_size
            .values()
            .all(|s| s.with_feedback_successes.is_none_or(|w| w >= s.no_feedback_successes))
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub gateway: GatewayConfig,
    pub feedback: FeedbackPolicy,
    pub mode: OutputMode,
    /// Worker threads; results are assembled in task order either way.
    pub lanes: usize,
}

impl BenchOptions {
    pub fn new(gateway: GatewayConfig, feedback: FeedbackPolicy, mode: OutputMode) -> Self {
        Self {
            gateway,
            feedback,
            mode,
            lanes: 1,
        }
    }
}

/// Success means the goal holds after an all-success behavior and, for
/// ordered tasks, the executed steps are exactly the oracle's.
pub fn judge(task: &TaskSpec, ep: &EpisodeRecord) -> bool {
    if ep.failure.is_failure() || ep.goal_satisfied != Some(true) {
        return false;
    }
    if !task.ordered {
        return true;
    }
    let Ok(plan) = oracle_plan(task, Default::default()) else {
        return false;
    };
    let executed: Vec<(&str, &str)> = ep
        .trace
        .iter()
        .flat_map(|t| &t.steps)
        .map(|s| (s.action.as_str(), s.input.as_str()))
        .collect();
    let expected: Vec<(&str, &str)> = plan.steps.iter().map(|s| (s.name.as_str(), s.input.as_str())).collect();
    executed == expected
}

fn step_multiset(p: &SequenceSteps) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = p.steps.iter().map(|s| (s.name.clone(), s.input.clone())).collect();
    v.sort();
    v
}

pub fn classify(task: &TaskSpec, ep: &EpisodeRecord) -> FailureCause {
    if ep.response.is_none() || ep.parse_error.is_some() {
        return FailureCause::Parse;
    }
    if !ep.validation.is_empty() {
        return FailureCause::UnknownAction;
    }
    let (Some(got), Ok(want)) = (
        ep.behavior.as_ref().and_then(|b| b.as_linear_sequence()),
        oracle_plan(task, Default::default()),
    ) else {
        return FailureCause::EnvFailure;
    };
    if got.len() == want.len() && got != want {
        if step_multiset(&got) == step_multiset(&want) {
            return FailureCause::WrongOrder;
        }
        if got.steps.iter().zip(&want.steps).all(|(a, b)| a.name == b.name) {
            return FailureCause::WrongTarget;
        }
    }
    FailureCause::EnvFailure
}

fn occlusion_fired(ep: &EpisodeRecord) -> bool {
    ep.trace
        .iter()
        .flat_map(|t| &t.steps)
        .any(|s| s.failure == Flag::Failure && s.output.contains("occluded"))
}

/// The corrective message a supervising human would type for this failure.
pub fn scripted_feedback(task: &TaskSpec, world: &WorldState, ep: &EpisodeRecord, cause: FailureCause) -> String {
    if occlusion_fired(ep) {
        return "Please home the arm before looking for the cube.".into();
    }
    match cause {
        FailureCause::WrongOrder => format!(
            "The order was wrong. Do it in exactly this order: {}.",
            task.instruction
        ),
        FailureCause::WrongTarget => {
            let names: Vec<String> = task
                .goals
                .iter()
                .filter_map(|g| match g {
                    crate::sim::GoalClause::InZone { object, .. } | crate::sim::GoalClause::On { object, .. } => {
                        Some(world.descriptor(object))
                    }
                    _ => None,
                })
                .collect();
            format!("You moved the wrong cube. The cube to move is the {}.", names.join(" and then the "))
        }
        FailureCause::Parse | FailureCause::UnknownAction => format!(
            "Only use actions from the library and answer with one fenced block. The task is: {}.",
            task.instruction
        ),
        FailureCause::EnvFailure => format!(
            "That did not work. Locate each cube, pick it up and then place it: {}.",
            task.instruction
        ),
    }
}

fn run_task(task: &TaskSpec, opts: &BenchOptions) -> Result<BenchResult, SessionError> {
    let started = std::time::Instant::now();
    let mut cfg = SessionConfig::new(task.scenario.clone(), opts.gateway.clone())
        .with_mode(opts.mode)
        .with_task(task.clone());
    cfg.reset_each_episode = true;
    let mut session = Session::create_with_id(task.id.clone(), cfg)?;
    let reset = task.scenario.reset().map_err(|e| SessionError::BadConfig(e.to_string()))?;
    let first = session.submit_message(&task.instruction)?;
    let steps_of = |e: &EpisodeRecord| e.trace.as_ref().map_or(0, |t| t.steps.len());
    let mut result = BenchResult {
        task_id: task.id.clone(),
        n_boxes: task.n_boxes().unwrap_or(0),
        condition: match opts.feedback {
            FeedbackPolicy::None => Condition::NoFeedback,
            FeedbackPolicy::Scripted => Condition::WithFeedback,
        },
        attempt_1_success: judge(task, &first),
        attempt_2_success: None,
        steps: steps_of(&first),
        cause_1: None,
        cause_2: None,
        feedback: None,
        wall_ms: 0,
    };
    if !result.attempt_1_success {
        let cause = classify(task, &first);
        result.cause_1 = Some(cause);
        if opts.feedback == FeedbackPolicy::Scripted {
            let text = scripted_feedback(task, &reset, &first, cause);
            let second = session.submit_message(&text)?;
            let ok = judge(task, &second);
            result.attempt_2_success = Some(ok);
            result.steps += steps_of(&second);
            result.cause_2 = (!ok).then(|| classify(task, &second));
            result.feedback = Some(text);
        }
    }
    result.wall_ms = started.elapsed().as_millis() as u64;
    Ok(result)
}

pub fn summarize(results: Vec<BenchResult>, feedback: FeedbackPolicy) -> BenchSummary {
    let mut per_size: BTreeMap<usize, SizeSummary> = BTreeMap::new();
    for r in &results {
        let s = per_size.entry(r.n_boxes).or_default();
        s.tasks += 1;
        s.no_feedback_successes += usize::from(r.attempt_1_success);
        if feedback == FeedbackPolicy::Scripted {
            *s.with_feedback_successes.get_or_insert(0) += usize::from(r.success());
        }
    }
    BenchSummary { results, per_size }
}

pub fn run_benchmark(tasks: &[TaskSpec], opts: &BenchOptions) -> Result<BenchSummary, SessionError> {
    let lanes = opts.lanes.clamp(1, tasks.len().max(1));
    let results: Vec<Result<BenchResult, SessionError>> = if lanes == 1 {
        tasks.iter().map(|t| run_task(t, opts)).collect()
    } else {
        let chunk = tasks.len().div_ceil(lanes);
        std::thread::scope(|scope| {
            let handles: Vec<_> = tasks
                .chunks(chunk)
                .map(|c| scope.spawn(move || c.iter().map(|t| run_task(t, opts)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("bench lane panicked"))
                .collect()
        })
    };
    Ok(summarize(results.into_iter().collect::<Result<_, _>>()?, opts.feedback))
}

/// Writes one row per result. `wall_ms` is only included when asked for, so
/// that repeated runs produce identical bytes.
pub fn write_csv<W: Write>(out: W, results: &[BenchResult], timings: bool) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "task_id",
        "n_boxes",
        "condition",
        "attempt_1_success",
        "attempt_2_success",
        "steps",
        "cause_1",
        "cause_2",
        "feedback",
    ];
    if timings {
        header.push("wall_ms");
    }
    w.write_record(&header)?;
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in results {
        let mut row = vec![
            r.task_id.clone(),
            r.n_boxes.to_string(),
            match r.condition {
                Condition::NoFeedback => "no_feedback",
                Condition::WithFeedback => "with_feedback",
            }
            .to_string(),
            flag(r.attempt_1_success),
            r.attempt_2_success.map(flag).unwrap_or_default(),
            r.steps.to_string(),
            r.cause_1.map(|c| c.as_str().to_string()).unwrap_or_default(),
            r.cause_2.map(|c| c.as_str().to_string()).unwrap_or_default(),
            r.feedback.clone().unwrap_or_default(),
        ];
        if timings {
            row.push(r.wall_ms.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
