use super::{CapExceeded, EngineError, ExecutionTrace, StepResult};
use crate::behavior::{Behavior, BehaviorMode, BehaviorRoot, FsmGraph, SequenceSteps, TerminalKind, TreeNode};
use crate::env::Environment;
use crate::registry::ActionLibrary;
use crate::Flag;

/// Leaf executions allowed per tree run.
pub const TREE_LEAF_CAP: usize = 10_000;
/// State visits allowed per state-machine run.
pub const FSM_STEP_CAP: usize = 100;

struct Recorder<'a> {
    env: &'a mut dyn Environment,
    on_step: &'a mut dyn FnMut(&StepResult),
    steps: Vec<StepResult>,
    prev_output: String,
}

impl Recorder<'_> {
    fn exec(&mut self, name: &str, input: &str, node_path: String) -> Flag {
        let outcome = self.env.execute(name, input, &self.prev_output);
        let step = StepResult {
            index: self.steps.len(),
            action: name.to_string(),
            input: input.to_string(),
            prev_output: std::mem::replace(&mut self.prev_output, outcome.output.clone()),
            output: outcome.output,
            failure: outcome.failure,
            node_path,
        };
        (self.on_step)(&step);
        self.steps.push(step);
        outcome.failure
    }
}

fn check_names(b: &Behavior, lib: &ActionLibrary) -> Result<(), EngineError> {
    let report = lib.validate_behavior_names(b);
    if report.is_empty() {
        Ok(())
    } else {
        Err(EngineError::UnvalidatedBehavior(report.unknown))
    }
}

fn wrong_mode(expected: BehaviorMode, b: &Behavior) -> EngineError {
    EngineError::WrongMode {
        expected,
        actual: b.mode(),
    }
}

fn finish(
    mode: BehaviorMode,
    rec: Recorder,
    state_before: Option<crate::WorldState>,
    behavior_failure: Flag,
    aborted_at: Option<usize>,
    cap_exceeded: Option<CapExceeded>,
) -> ExecutionTrace {
    let state_after = rec.env.world().cloned();
    ExecutionTrace {
        mode,
        steps: rec.steps,
        behavior_failure,
        aborted_at,
        cap_exceeded,
        state_before,
        state_after,
    }
}

fn exec_sequence(seq: &SequenceSteps, mut rec: Recorder, before: Option<crate::WorldState>) -> ExecutionTrace {
    for step in &seq.steps {
        if rec.exec(&step.name, &step.input, String::new()).is_failure() {
            // later steps usually depend on this one, so stop here
            let at = rec.steps.len() - 1;
            return finish(BehaviorMode::Sequence, rec, before, Flag::Failure, Some(at), None);
        }
    }
    finish(BehaviorMode::Sequence, rec, before, Flag::Success, None, None)
}

struct BudgetSpent;

fn tick(node: &TreeNode, path: &str, rec: &mut Recorder) -> Result<Flag, BudgetSpent> {
    let child_path = |i: usize| {
        if path.is_empty() {
            i.to_string()
        } else {
            format!("{path}/{i}")
        }
    };
    match node {
        TreeNode::Action { name, input } | TreeNode::Condition { name, input } => {
            if rec.steps.len() >= TREE_LEAF_CAP {
                return Err(BudgetSpent);
            }
            Ok(rec.exec(name, input, path.to_string()))
        }
        TreeNode::Sequence { children } => {
            for (i, c) in children.iter().enumerate() {
                if tick(c, &child_path(i), rec)?.is_failure() {
                    return Ok(Flag::Failure);
                }
            }
            Ok(Flag::Success)
        }
        TreeNode::Fallback { children } => {
            for (i, c) in children.iter().enumerate() {
                if tick(c, &child_path(i), rec)?.is_success() {
                    return Ok(Flag::Success);
                }
            }
            Ok(Flag::Failure)
        }
        TreeNode::Parallel { threshold, children } => {
            let mut successes = 0;
            for (i, c) in children.iter().enumerate() {
                if tick(c, &child_path(i), rec)?.is_success() {
                    successes += 1;
                }
            }
            Ok(Flag::from_failed(successes < *threshold))
        }
        TreeNode::Inverter { child } => Ok(match tick(child, &child_path(0), rec)? {
            Flag::Success => Flag::Failure,
            Flag::Failure => Flag::Success,
        }),
        TreeNode::Retry { attempts, child } => {
            for _ in 0..*attempts {
                if tick(child, &child_path(0), rec)?.is_success() {
                    return Ok(Flag::Success);
                }
            }
            Ok(Flag::Failure)
        }
    }
}

fn exec_tree(root: &TreeNode, mut rec: Recorder, before: Option<crate::WorldState>) -> ExecutionTrace {
    match tick(root, "", &mut rec) {
        Ok(flag) => finish(BehaviorMode::Tree, rec, before, flag, None, None),
        Err(BudgetSpent) => finish(
            BehaviorMode::Tree,
            rec,
            before,
            Flag::Failure,
            None,
            Some(CapExceeded::TickBudgetExhausted),
        ),
    }
}

fn exec_fsm(graph: &FsmGraph, mut rec: Recorder, before: Option<crate::WorldState>) -> ExecutionTrace {
    let mut current = graph.initial.as_str();
    loop {
        if let Some(kind) = graph.terminals.get(current) {
            let flag = Flag::from_failed(*kind == TerminalKind::Failure);
            return finish(BehaviorMode::Fsm, rec, before, flag, None, None);
        }
        if rec.steps.len() >= FSM_STEP_CAP {
            return finish(
                BehaviorMode::Fsm,
                rec,
                before,
                Flag::Failure,
                None,
                Some(CapExceeded::StepCapExceeded),
            );
        }
        let state = &graph.states[current];
        current = match rec.exec(&state.action, &state.input, current.to_string()) {
            Flag::Success => &state.on_success,
            Flag::Failure => &state.on_failure,
        };
    }
}

fn run_with(
    b: &Behavior,
    lib: &ActionLibrary,
    env: &mut dyn Environment,
    on_step: &mut dyn FnMut(&StepResult),
    expected: Option<BehaviorMode>,
) -> Result<ExecutionTrace, EngineError> {
    if let Some(m) = expected {
        if b.mode() != m {
            return Err(wrong_mode(m, b));
        }
    }
    check_names(b, lib)?;
    match &b.root {
        BehaviorRoot::Tree { root } => root
            .check_arity()
            .map_err(|v| EngineError::MalformedTree(format!("{}: {}", v.node, v.reason)))?,
        BehaviorRoot::Fsm(graph) => graph
            .validate()
            .map_err(|v| EngineError::MalformedFsm(format!("{v:?}")))?,
        BehaviorRoot::Sequence(_) => {}
    }
    let before = env.world().cloned();
    let rec = Recorder {
        env,
        on_step,
        steps: Vec::new(),
        prev_output: String::new(),
    };
    Ok(match &b.root {
        BehaviorRoot::Sequence(seq) => exec_sequence(seq, rec, before),
        BehaviorRoot::Tree { root } => exec_tree(root, rec, before),
        BehaviorRoot::Fsm(graph) => exec_fsm(graph, rec, before),
    })
}

/// Runs the steps in order, threading `prev_output`, and stops at the first failure.
pub fn run_sequence(b: &Behavior, lib: &ActionLibrary, env: &mut dyn Environment) -> Result<ExecutionTrace, EngineError> {
    run_with(b, lib, env, &mut |_| {}, Some(BehaviorMode::Sequence))
}

/// Ticks the tree once from the root; the behavior succeeds iff the root does.
pub fn run_tree(b: &Behavior, lib: &ActionLibrary, env: &mut dyn Environment) -> Result<ExecutionTrace, EngineError> {
    run_with(b, lib, env, &mut |_| {}, Some(BehaviorMode::Tree))
}

/// Walks the state machine from its initial state until a terminal.
pub fn run_fsm(b: &Behavior, lib: &ActionLibrary, env: &mut dyn Environment) -> Result<ExecutionTrace, EngineError> {
    run_with(b, lib, env, &mut |_| {}, Some(BehaviorMode::Fsm))
}

/// Dispatches on the behavior's mode.
pub fn run_behavior(b: &Behavior, lib: &ActionLibrary, env: &mut dyn Environment) -> Result<ExecutionTrace, EngineError> {
    run_with(b, lib, env, &mut |_| {}, None)
}

/// Like [`run_behavior`], calling `on_step` as each step completes.
pub fn run_behavior_observed(
    b: &Behavior,
    lib: &ActionLibrary,
    env: &mut dyn Environment,
    on_step: &mut dyn FnMut(&StepResult),
) -> Result<ExecutionTrace, EngineError> {
    run_with(b, lib, env, on_step, None)
}
