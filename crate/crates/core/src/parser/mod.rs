//! Fenced-block extraction and the four behavior grammars.
//!
//! | fence tag | payload | result |
//! |---|---|---|
//! | `json` | `{"actions":[{"name":..,"input":..}]}` | sequence |
//! | `json` | `{"fsm":{"initial":..,"states":{..},"terminals":{..}}}` | state machine |
//! | `xml` | `<BehaviorTree>` with one child node | behavior tree |
//! | `python` | straight-line `name("input")` calls | sequence |
//!
//! Parsing never consults the action library; unknown names are reported by
//! [`crate::ActionLibrary::validate_behavior_names`].

mod fence;
mod json;
mod script;
pub mod serialize;
mod tree;

use serde::{Deserialize, Serialize};

use crate::behavior::{ArityViolation, Behavior, FsmViolation};

pub use fence::extract_fenced_block;
pub use serialize::OutputMode;
pub use json::{parse_fsm, parse_sequence};
pub use script::parse_script;
pub use tree::parse_tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FenceTag {
    Python,
    Json,
    Xml,
}

impl FenceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FenceTag::Python => "python",
            FenceTag::Json => "json",
            FenceTag::Xml => "xml",
        }
    }

    pub fn from_info(info: &str) -> Option<Self> {
        match info {
            "python" => Some(FenceTag::Python),
            "json" => Some(FenceTag::Json),
            "xml" => Some(FenceTag::Xml),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FencedBlock {
    pub tag: FenceTag,
    /// Bytes strictly between the opening and closing fence lines.
    pub payload: String,
    /// Byte range of the whole block (opening fence through closing fence).
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ParseError {
    #[error("no ```python, ```json or ```xml block found")]
    NoFence,
    #[error("fence opened on line {line} is never closed")]
    UnterminatedFence { line: usize },
    #[error("schema error at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("xml error on line {line}: {message}")]
    XmlError { line: u32, message: String },
    #[error("unknown element <{0}>")]
    UnknownElement(String),
    #[error("arity error in {node}: {reason}")]
    ArityError { node: String, reason: String },
    #[error("initial state `{0}` does not exist")]
    MissingInitial(String),
    #[error("`{0}` is both a state and a terminal")]
    DuplicateId(String),
    #[error("state `{state}` has a dangling {label} transition")]
    DanglingTransition { state: String, label: String },
    #[error("no success terminal is reachable from the initial state")]
    NoSuccessTerminal,
    #[error("unsupported construct on line {line}: {text}")]
    UnsupportedConstruct { line: usize, text: String },
}

impl ParseError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<ArityViolation> for ParseError {
    fn from(v: ArityViolation) -> Self {
        ParseError::ArityError {
            node: v.node,
            reason: v.reason,
        }
    }
}

impl From<FsmViolation> for ParseError {
    fn from(v: FsmViolation) -> Self {
        match v {
            FsmViolation::MissingInitial(s) => ParseError::MissingInitial(s),
            FsmViolation::DuplicateId(s) => ParseError::DuplicateId(s),
            FsmViolation::DanglingTransition { state, label } => ParseError::DanglingTransition { state, label },
            FsmViolation::NoSuccessTerminal => ParseError::NoSuccessTerminal,
        }
    }
}

/// Parses the payload of an already-extracted block according to its tag.
/// A `json` payload with a top-level `fsm` key is a state machine, otherwise a sequence.
pub fn parse_block(block: &FencedBlock) -> Result<Behavior, ParseError> {
    let mut behavior = match block.tag {
        FenceTag::Python => parse_script(&block.payload)?,
        FenceTag::Xml => parse_tree(&block.payload)?,
        FenceTag::Json if json::has_fsm_key(&block.payload) => parse_fsm(&block.payload)?,
        FenceTag::Json => parse_sequence(&block.payload)?,
    };
    behavior.source = Some(block.clone());
    Ok(behavior)
}

/// Extracts the first fenced block of `text` and parses it.
pub fn parse_response(text: &str) -> Result<Behavior, ParseError> {
    parse_block(&extract_fenced_block(text)?)
}
