//! Writers for the four grammars. Every writer's output parses back to an
//! equal behavior.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::FenceTag;
use crate::behavior::{Behavior, BehaviorRoot, FsmGraph, SequenceSteps, TerminalKind, TreeNode};

/// The output format requested from the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    #[default]
    Sequence,
    Tree,
    Fsm,
    Script,
}

impl OutputMode {
    pub const ALL: [OutputMode; 4] = [OutputMode::Sequence, OutputMode::Tree, OutputMode::Fsm, OutputMode::Script];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputMode::Sequence => "sequence",
            OutputMode::Tree => "tree",
            OutputMode::Fsm => "fsm",
            OutputMode::Script => "script",
        }
    }

    pub fn fence_tag(self) -> FenceTag {
        match self {
            OutputMode::Sequence | OutputMode::Fsm => FenceTag::Json,
            OutputMode::Tree => FenceTag::Xml,
            OutputMode::Script => FenceTag::Python,
        }
    }
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutputMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected sequence, tree, fsm or script)"))
    }
}

pub fn sequence_json(seq: &SequenceSteps) -> String {
    let actions: Vec<_> = seq
        .steps
        .iter()
        .map(|s| json!({"name": s.name, "input": s.input}))
        .collect();
    serde_json::to_string_pretty(&json!({ "actions": actions })).expect("plain JSON")
}

pub fn fsm_json(graph: &FsmGraph) -> String {
    let terminals: serde_json::Map<_, _> = graph
        .terminals
        .iter()
        .map(|(id, kind)| {
            let k = match kind {
                TerminalKind::Success => "success",
                TerminalKind::Failure => "failure",
            };
            (id.clone(), json!(k))
        })
        .collect();
    let value = json!({
        "fsm": {
            "initial": graph.initial,
            "states": graph.states,
            "terminals": terminals,
        }
    });
    serde_json::to_string_pretty(&value).expect("plain JSON")
}

fn xml_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            // attribute-value normalization would turn raw whitespace into spaces
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn write_node(out: &mut String, node: &TreeNode, depth: usize) {
    let pad = "  ".repeat(depth);
    match node {
        TreeNode::Action { name, input } | TreeNode::Condition { name, input } => {
            let _ = write!(out, "{pad}<{} name=\"{}\"", node.element_name(), xml_attr(name));
            if !input.is_empty() {
                let _ = write!(out, " input=\"{}\"", xml_attr(input));
            }
            out.push_str("/>\n");
        }
        _ => {
            let attrs = match node {
                TreeNode::Parallel { threshold, .. } => format!(" threshold=\"{threshold}\""),
                TreeNode::Retry { attempts, .. } => format!(" num=\"{attempts}\""),
                _ => String::new(),
            };
            let _ = writeln!(out, "{pad}<{}{attrs}>", node.element_name());
            for c in node.children() {
                write_node(out, c, depth + 1);
            }
            let _ = writeln!(out, "{pad}</{}>", node.element_name());
        }
    }
}

pub fn tree_xml(root: &TreeNode) -> String {
    let mut out = String::from("<BehaviorTree>\n");
    write_node(&mut out, root, 1);
    out.push_str("</BehaviorTree>");
    out
}

fn py_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\x7f' => {
                let _ = write!(out, "\\x{:02x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn script(seq: &SequenceSteps) -> String {
    seq.steps
        .iter()
        .map(|s| {
            if s.input.is_empty() {
                format!("{}()", s.name)
            } else {
                format!("{}({})", s.name, py_string(&s.input))
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn fenced(tag: FenceTag, payload: &str) -> String {
    format!("```{}\n{payload}\n```", tag.as_str())
}

/// Serializes a behavior in its own grammar.
pub fn behavior_payload(b: &Behavior) -> (FenceTag, String) {
    match &b.root {
        BehaviorRoot::Sequence(seq) => (FenceTag::Json, sequence_json(seq)),
        BehaviorRoot::Tree { root } => (FenceTag::Xml, tree_xml(root)),
        BehaviorRoot::Fsm(graph) => (FenceTag::Json, fsm_json(graph)),
    }
}

/// Encodes a straight-line plan in the requested output mode. An empty plan
/// has no tree encoding and falls back to an empty JSON sequence.
pub fn plan_payload(plan: &SequenceSteps, mode: OutputMode) -> (FenceTag, String) {
    match mode {
        OutputMode::Sequence => (FenceTag::Json, sequence_json(plan)),
        OutputMode::Tree => match plan.to_tree() {
            Some(tree) => (FenceTag::Xml, tree_xml(&tree)),
            None => (FenceTag::Json, sequence_json(plan)),
        },
        OutputMode::Fsm => (FenceTag::Json, fsm_json(&plan.to_fsm())),
        OutputMode::Script => (FenceTag::Python, script(plan)),
    }
}

/// The fenced block for `plan` in `mode`.
pub fn fenced_plan(plan: &SequenceSteps, mode: OutputMode) -> String {
    let (tag, payload) = plan_payload(plan, mode);
    fenced(tag, &payload)
}
