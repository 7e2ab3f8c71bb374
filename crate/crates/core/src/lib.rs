//! Engine for programming a robot through natural language.
//!
//! A human message (task or corrective feedback) is combined with the atomic
//! action library, a textual observation of the world and prompt scaffolding,
//! sent to a language model, and the fenced behavior in the reply is parsed,
//! validated and executed against a deterministic simulated environment.
//!
//! Module map:
//! - [`registry`]: atomic action library (load, render, register, validate names)
//! - [`sim`]: symbolic kitchen/tabletop world, builtin actions, oracle plans
//! - [`observation`]: world state to observation text
//! - [`prompt`]: prompt assembly from template, library, observation and feedback
//! - [`gateway`]: chat-completions client plus replay/oracle/corrupting/scripted mocks
//! - [`parser`]: fenced-block extraction and the four behavior grammars
//! - [`engine`]: sequence / behavior-tree / state-machine executors and the return function
//! - [`env`]: binds library entries to sim builtins, DMP skills or HTTP bridges
//! - [`dmp`]: dynamic movement primitives learned from demonstrations
//! - [`session`]: the conversation loop, persistence, events and supervisory mode
//! - [`bench`]: task generation and success-rate harness

pub mod behavior;
pub mod bench;
pub mod dmp;
pub mod engine;
pub mod env;
mod flag;
pub mod gateway;
pub mod observation;
pub mod parser;
pub mod prompt;
pub mod registry;
pub mod session;
pub mod sim;

pub use behavior::{Behavior, BehaviorRoot, FsmGraph, FsmState, SequenceSteps, Step, TreeNode};
pub use engine::{compute_return, ExecutionTrace, ReturnLedger, StepResult};
pub use flag::Flag;
pub use registry::{ActionLibrary, AtomicActionSpec, EndpointBinding, EndpointKind, EndpointType};
pub use sim::{Scenario, TaskSpec, WorldState};
