//! Prompt assembly.
//!
//! Sections, always in this order: preamble, action library, observation,
//! exemplars, reasoning instruction, task, feedback history, format note.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::observation::Observation;
use crate::parser::{extract_fenced_block, OutputMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatNotes {
    pub sequence: String,
    pub tree: String,
    pub fsm: String,
    pub script: String,
}

impl FormatNotes {
    pub fn get(&self, mode: OutputMode) -> &str {
        match mode {
            OutputMode::Sequence => &self.sequence,
            OutputMode::Tree => &self.tree,
            OutputMode::Fsm => &self.fsm,
            OutputMode::Script => &self.script,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub situation: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub preamble: String,
    pub cot_instruction: String,
    pub format_notes: FormatNotes,
    #[serde(default)]
    pub exemplars: Vec<Exemplar>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("the task text is empty")]
    EmptyTask,
    #[error("template has no format note for mode `{0}`")]
    MissingFormatNote(String),
    #[error("exemplar {0} does not contain a single well-formed fenced block")]
    BadExemplarFence(usize),
    #[error("malformed template: {0}")]
    MalformedTemplate(String),
}

impl PromptTemplate {
    pub fn builtin_default() -> Self {
        Self::from_json_str(include_str!("../assets/default_template.json")).expect("shipped template is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self, PromptError> {
        let value: Value = serde_json::from_str(text).map_err(|e| PromptError::MalformedTemplate(e.to_string()))?;
        let notes = value.get("format_notes").and_then(Value::as_object);
        for mode in OutputMode::ALL {
            if !notes.is_some_and(|n| n.get(mode.as_str()).is_some_and(Value::is_string)) {
                return Err(PromptError::MissingFormatNote(mode.as_str().to_string()));
            }
        }
        let tmpl: PromptTemplate =
            serde_json::from_value(value).map_err(|e| PromptError::MalformedTemplate(e.to_string()))?;
        for (i, ex) in tmpl.exemplars.iter().enumerate() {
            if extract_fenced_block(&ex.response).is_err() {
                return Err(PromptError::BadExemplarFence(i));
            }
        }
        Ok(tmpl)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::MalformedTemplate(e.to_string()))?;
        Self::from_json_str(&text)
    }
}

pub const SECTION_LABELS: [&str; 8] = [
    "Instructions",
    "Action library",
    "Observation",
    "Examples",
    "Reasoning",
    "Task",
    "Feedback",
    "Output format",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub sections: Vec<(String, String)>,
    pub rendered: String,
    pub mode: OutputMode,
    /// `step_count` of the observed world.
    pub world_version: u64,
}

fn render_sections(sections: &[(String, String)]) -> String {
    sections
        .iter()
        .map(|(label, text)| format!("## {label}\n{text}\n"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Prompt {
    /// The preamble alone (sent as the system message).
    pub fn system_text(&self) -> &str {
        &self.sections[0].1
    }

    /// Every section after the preamble (sent as the user message).
    pub fn user_text(&self) -> String {
        render_sections(&self.sections[1..])
    }

    pub fn section(&self, label: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, t)| t.as_str())
    }
}

fn render_exemplars(exemplars: &[Exemplar]) -> String {
    exemplars
        .iter()
        .enumerate()
        .map(|(i, e)| format!("Example {}\nSituation: {}\nResponse:\n{}", i + 1, e.situation, e.response))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn render_feedback(feedback: &[String]) -> String {
    if feedback.is_empty() {
        return "(none)".to_string();
    }
    feedback
        .iter()
        .enumerate()
        .map(|(i, f)| format!("FEEDBACK[{}]: {f}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_prompt(
    tmpl: &PromptTemplate,
    lib_desc: &str,
    obs: &Observation,
    task: &str,
    feedback: &[String],
    mode: OutputMode,
) -> Result<Prompt, PromptError> {
    if task.trim().is_empty() {
        return Err(PromptError::EmptyTask);
    }
    let texts = [
        tmpl.preamble.clone(),
        lib_desc.trim_end().to_string(),
        obs.text(),
        render_exemplars(&tmpl.exemplars),
        tmpl.cot_instruction.clone(),
        task.to_string(),
        render_feedback(feedback),
        tmpl.format_notes.get(mode).to_string(),
    ];
    let sections: Vec<(String, String)> = SECTION_LABELS
        .iter()
        .zip(texts)
        .map(|(l, t)| (l.to_string(), t))
        .collect();
    Ok(Prompt {
        rendered: render_sections(&sections),
        sections,
        mode,
        world_version: obs.world_version,
    })
}
