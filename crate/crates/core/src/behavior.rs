//! Executable behaviors: action sequences, behavior trees and state machines.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::parser::FencedBlock;

/// One atomic action invocation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub name: String,
    #[serde(default)]
    pub input: String,
}

impl Step {
    pub fn new(name: impl Into<String>, input: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            input: input.into(),
        }
    }

    pub fn bare(name: impl Into<String>) -> Self {
        Self::new(name, "")
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({:?})", self.name, self.input)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SequenceSteps {
    pub steps: Vec<Step>,
}

impl SequenceSteps {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Single `Sequence` node over action leaves. `None` for an empty plan,
    /// since composite nodes need at least one child.
    pub fn to_tree(&self) -> Option<TreeNode> {
        if self.steps.is_empty() {
            return None;
        }
        Some(TreeNode::Sequence {
            children: self
                .steps
                .iter()
                .map(|s| TreeNode::Action {
                    name: s.name.clone(),
                    input: s.input.clone(),
                })
                .collect(),
        })
    }

    /// Linear state machine: `s0 -> s1 -> ... -> done`, every failure edge to `failed`.
    pub fn to_fsm(&self) -> FsmGraph {
        let mut states = BTreeMap::new();
        let n = self.steps.len();
        for (i, step) in self.steps.iter().enumerate() {
            let next = if i + 1 == n {
                FsmGraph::LINEAR_DONE.to_string()
            } else {
                format!("s{}", i + 1)
            };
            states.insert(
                format!("s{i}"),
                FsmState {
                    action: step.name.clone(),
                    input: step.input.clone(),
                    on_success: next,
                    on_failure: FsmGraph::LINEAR_FAILED.to_string(),
                },
            );
        }
        let mut terminals = BTreeMap::new();
        terminals.insert(FsmGraph::LINEAR_DONE.to_string(), TerminalKind::Success);
        terminals.insert(FsmGraph::LINEAR_FAILED.to_string(), TerminalKind::Failure);
        FsmGraph {
            initial: if n == 0 {
                FsmGraph::LINEAR_DONE.to_string()
            } else {
                "s0".to_string()
            },
            states,
            terminals,
        }
    }
}

/// Behavior-tree node. Leaves execute an atomic action; composites and
/// decorators combine child statuses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Sequence { children: Vec<TreeNode> },
    Fallback { children: Vec<TreeNode> },
    Parallel { threshold: usize, children: Vec<TreeNode> },
    Condition { name: String, input: String },
    Action { name: String, input: String },
    Inverter { child: Box<TreeNode> },
    Retry { attempts: u32, child: Box<TreeNode> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArityViolation {
    pub node: String,
    pub reason: String,
}

impl TreeNode {
    pub fn element_name(&self) -> &'static str {
        match self {
            TreeNode::Sequence { .. } => "Sequence",
            TreeNode::Fallback { .. } => "Fallback",
            TreeNode::Parallel { .. } => "Parallel",
            TreeNode::Condition { .. } => "Condition",
            TreeNode::Action { .. } => "Action",
            TreeNode::Inverter { .. } => "Inverter",
            TreeNode::Retry { .. } => "Retry",
        }
    }

    pub fn children(&self) -> Vec<&TreeNode> {
        match self {
            TreeNode::Sequence { children }
            | TreeNode::Fallback { children }
            | TreeNode::Parallel { children, .. } => children.iter().collect(),
            TreeNode::Inverter { child } | TreeNode::Retry { child, .. } => vec![child.as_ref()],
            TreeNode::Condition { .. } | TreeNode::Action { .. } => Vec::new(),
        }
    }

    /// Checks the structural rules of every node below (and including) `self`.
    pub fn check_arity(&self) -> Result<(), ArityViolation> {
        self.check_arity_at("root")
    }

    fn check_arity_at(&self, path: &str) -> Result<(), ArityViolation> {
        let violation = |reason: String| ArityViolation {
            node: format!("{} at {path}", self.element_name()),
            reason,
        };
        match self {
            TreeNode::Sequence { children } | TreeNode::Fallback { children } => {
                if children.is_empty() {
                    return Err(violation("needs at least one child".into()));
                }
            }
            TreeNode::Parallel {
                threshold,
                children,
            } => {
                if children.is_empty() {
                    return Err(violation("needs at least one child".into()));
                }
                if *threshold < 1 || *threshold > children.len() {
                    return Err(violation(format!(
                        "threshold {threshold} outside [1, {}]",
                        children.len()
                    )));
                }
            }
            TreeNode::Retry { attempts, .. } => {
                if *attempts < 1 {
                    return Err(violation("retry count must be at least 1".into()));
                }
            }
            TreeNode::Inverter { .. } | TreeNode::Condition { .. } | TreeNode::Action { .. } => {}
        }
        for (i, child) in self.children().into_iter().enumerate() {
            child.check_arity_at(&format!("{path}/{i}"))?;
        }
        Ok(())
    }

    /// `Some` when the tree is a single `Sequence` of plain action leaves.
    pub fn as_linear_sequence(&self) -> Option<SequenceSteps> {
        match self {
            TreeNode::Sequence { children } => children
                .iter()
                .map(|c| match c {
                    TreeNode::Action { name, input } => Some(Step::new(name, input)),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .map(SequenceSteps::new),
            _ => None,
        }
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            TreeNode::Condition { name, .. } | TreeNode::Action { name, .. } => out.push(name),
            _ => {
                for c in self.children() {
                    c.collect_names(out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmState {
    pub action: String,
    #[serde(default)]
    pub input: String,
    pub on_success: String,
    pub on_failure: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmGraph {
    pub initial: String,
    pub states: BTreeMap<String, FsmState>,
    pub terminals: BTreeMap<String, TerminalKind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FsmViolation {
    MissingInitial(String),
    DuplicateId(String),
    DanglingTransition { state: String, label: String },
    NoSuccessTerminal,
}

impl FsmGraph {
    pub const LINEAR_DONE: &'static str = "done";
    pub const LINEAR_FAILED: &'static str = "failed";

    fn node_exists(&self, id: &str) -> bool {
        self.states.contains_key(id) || self.terminals.contains_key(id)
    }

    pub fn validate(&self) -> Result<(), FsmViolation> {
        if let Some(dup) = self.states.keys().find(|k| self.terminals.contains_key(*k)) {
            return Err(FsmViolation::DuplicateId(dup.clone()));
        }
        if !self.node_exists(&self.initial) {
            return Err(FsmViolation::MissingInitial(self.initial.clone()));
        }
        for (id, state) in &self.states {
            for (label, target) in [("on_success", &state.on_success), ("on_failure", &state.on_failure)] {
                if !self.node_exists(target) {
                    return Err(FsmViolation::DanglingTransition {
                        state: id.clone(),
                        label: label.to_string(),
                    });
                }
            }
        }
        if !self.success_reachable() {
            return Err(FsmViolation::NoSuccessTerminal);
        }
        Ok(())
    }

    fn success_reachable(&self) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.initial.as_str()]);
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            if self.terminals.get(id) == Some(&TerminalKind::Success) {
                return true;
            }
            if let Some(state) = self.states.get(id) {
                queue.push_back(&state.on_success);
                queue.push_back(&state.on_failure);
            }
        }
        false
    }

    /// Recovers the plan from a linear encoding produced by [`SequenceSteps::to_fsm`]
    /// (or any graph whose success edges form a simple chain with all failure
    /// edges going to failure terminals).
    pub fn as_linear_sequence(&self) -> Option<SequenceSteps> {
        let mut steps = Vec::new();
        let mut cursor = self.initial.as_str();
        let mut visited = BTreeSet::new();
        loop {
            if self.terminals.get(cursor) == Some(&TerminalKind::Success) {
                break;
            }
            let state = self.states.get(cursor)?;
            if !visited.insert(cursor) {
                return None;
            }
            if self.terminals.get(state.on_failure.as_str()) != Some(&TerminalKind::Failure) {
                return None;
            }
            steps.push(Step::new(&state.action, &state.input));
            cursor = &state.on_success;
        }
        (visited.len() == self.states.len()).then(|| SequenceSteps::new(steps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorMode {
    Sequence,
    Tree,
    Fsm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BehaviorRoot {
    Sequence(SequenceSteps),
    Tree { root: TreeNode },
    Fsm(FsmGraph),
}

/// A parsed behavior together with the fenced block it came from.
///
/// Equality is structural: two behaviors are equal when their roots are,
/// wherever they were parsed from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Behavior {
    pub root: BehaviorRoot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<FencedBlock>,
}

impl PartialEq for Behavior {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Eq for Behavior {}

impl Behavior {
    pub fn sequence(steps: Vec<Step>) -> Self {
        Self {
            root: BehaviorRoot::Sequence(SequenceSteps::new(steps)),
            source: None,
        }
    }

    pub fn tree(root: TreeNode) -> Self {
        Self {
            root: BehaviorRoot::Tree { root },
            source: None,
        }
    }

    pub fn fsm(graph: FsmGraph) -> Self {
        Self {
            root: BehaviorRoot::Fsm(graph),
            source: None,
        }
    }

    pub fn mode(&self) -> BehaviorMode {
        match &self.root {
            BehaviorRoot::Sequence(_) => BehaviorMode::Sequence,
            BehaviorRoot::Tree { .. } => BehaviorMode::Tree,
            BehaviorRoot::Fsm(_) => BehaviorMode::Fsm,
        }
    }

    /// Every referenced action name, in traversal order, duplicates included.
    pub fn action_names(&self) -> Vec<&str> {
        match &self.root {
            BehaviorRoot::Sequence(seq) => seq.steps.iter().map(|s| s.name.as_str()).collect(),
            BehaviorRoot::Tree { root } => {
                let mut out = Vec::new();
                root.collect_names(&mut out);
                out
            }
            BehaviorRoot::Fsm(graph) => graph.states.values().map(|s| s.action.as_str()).collect(),
        }
    }

    /// The straight-line plan this behavior encodes, if it is one.
    pub fn as_linear_sequence(&self) -> Option<SequenceSteps> {
        match &self.root {
            BehaviorRoot::Sequence(seq) => Some(seq.clone()),
            BehaviorRoot::Tree { root } => root.as_linear_sequence(),
            BehaviorRoot::Fsm(graph) => graph.as_linear_sequence(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> SequenceSteps {
        SequenceSteps::new(vec![
            Step::new("locate_object", "blue cube"),
            Step::new("pick_up", "blue cube"),
            Step::bare("drop_in_sink"),
        ])
    }

    #[test]
    fn linear_encodings_round_trip() {
        let seq = plan();
        assert_eq!(seq.to_tree().unwrap().as_linear_sequence(), Some(seq.clone()));
        let fsm = seq.to_fsm();
        assert_eq!(fsm.validate(), Ok(()));
        assert_eq!(fsm.as_linear_sequence(), Some(seq));
    }

    #[test]
    fn empty_plan_encodings() {
        let empty = SequenceSteps::default();
        assert!(empty.to_tree().is_none());
        let fsm = empty.to_fsm();
        assert_eq!(fsm.initial, "done");
        assert_eq!(fsm.validate(), Ok(()));
        assert_eq!(fsm.as_linear_sequence(), Some(empty));
    }

    #[test]
    fn parallel_threshold_bounds() {
        let leaf = || TreeNode::Action {
            name: "home_arm".into(),
            input: String::new(),
        };
        let bad = TreeNode::Parallel {
            threshold: 5,
            children: vec![leaf(), leaf()],
        };
        assert!(bad.check_arity().is_err());
        let ok = TreeNode::Parallel {
            threshold: 2,
            children: vec![leaf(), leaf()],
        };
        assert!(ok.check_arity().is_ok());
    }

    #[test]
    fn unreachable_success_terminal() {
        let mut fsm = plan().to_fsm();
        // cut the chain: last state loops back to s0 on success
        fsm.states.get_mut("s2").unwrap().on_success = "s0".into();
        assert_eq!(fsm.validate(), Err(FsmViolation::NoSuccessTerminal));
    }

    #[test]
    fn equality_ignores_source() {
        let a = Behavior::sequence(plan().steps);
        let mut b = a.clone();
        b.source = Some(FencedBlock {
            tag: crate::parser::FenceTag::Json,
            payload: String::new(),
            span: (0, 0),
        });
        assert_eq!(a, b);
    }
}
