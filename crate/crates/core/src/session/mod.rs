//! The conversation loop: a human message becomes a prompt, a completion, a
//! parsed behavior and an executed trace, and the outcome is added to the
//! return ledger.

mod clock;
mod events;
mod log;

use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::dmp::SkillStore;
use crate::engine::{run_behavior_observed, ExecutionTrace, ReturnError, ReturnLedger};
use crate::env::{ActionOutcome, Environment, SimEnv};
use crate::gateway::{prompt_hash, CompletionContext, Gateway, GatewayConfig, GatewayError, LlmResponse};
use crate::observation::{Observation, ObserverSet, ObserverSpec};
use crate::parser::{parse_response, OutputMode, ParseError};
use crate::prompt::{build_prompt, Prompt, PromptTemplate};
use crate::registry::{ActionLibrary, ValidationReport};
use crate::sim::{
    parse_instruction, GridState, Location, PerturbationEvent, Scenario, ScenarioKind, TaskSpec, WorldState, Zone,
    SUPERVISORY_BUILTINS,
};
use crate::Flag;

pub use clock::{Clock, LatencyConfig, LatencyInjector, SimClock, WallClock};
use events::EventBus;
pub use events::{EventKind, EventListener, SessionEvent};
pub use log::{LogRecord, SessionLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub mode: OutputMode,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub gateway: GatewayConfig,
    /// Prompt template file; the shipped template when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observers: Option<Vec<ObserverSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supervisory: Option<LatencyConfig>,
    #[serde(default)]
    pub carryover_feedback: Vec<String>,
    /// Goal used by mock gateways and for `goal_satisfied`. Coffee, pasta and
    /// supervisory scenes have a default; tabletop goals are otherwise read
    /// from the task text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_spec: Option<TaskSpec>,
    /// Restore the scenario's reset state before every episode after the first.
    #[serde(default)]
    pub reset_each_episode: bool,
    /// Armed again at the start of every episode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturb_each_episode: Vec<PerturbationEvent>,
    /// Library snapshot; the builtin library when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<ActionLibrary>,
    #[serde(default)]
    pub skills: SkillStore,
}

fn default_beta() -> f64 {
    1.0
}

impl SessionConfig {
    pub fn new(scenario: Scenario, gateway: GatewayConfig) -> Self {
        Self {
            scenario,
            mode: OutputMode::Sequence,
            beta: 1.0,
            gateway,
            template: None,
            observers: None,
            supervisory: None,
            carryover_feedback: Vec::new(),
            task_spec: None,
            reset_each_episode: false,
            perturb_each_episode: Vec::new(),
            library: None,
            skills: SkillStore::default(),
        }
    }

    pub fn with_mode(mut self, mode: OutputMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_task(mut self, task: TaskSpec) -> Self {
        self.task_spec = Some(task);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingTask,
    AwaitingFeedback,
    Executing,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("bad session config: {0}")]
    BadConfig(String),
    #[error("session is closed")]
    SessionClosed,
    #[error("message is empty")]
    EmptyMessage,
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("perturbation rejected: {0}")]
    InvalidPerturbation(String),
    #[error("session is not in the supervisory scenario")]
    NotSupervisory,
    #[error("session log: {0}")]
    Io(String),
    #[error("replayed episode {tau} does not match the log")]
    ReplayDivergence { tau: u32 },
}

impl From<ReturnError> for SessionError {
    fn from(e: ReturnError) -> Self {
        SessionError::BadConfig(e.to_string())
    }
}

/// Everything that happened for one behavior-policy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub tau: u32,
    pub message: String,
    pub prompt: Prompt,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<LlmResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway_error: Option<GatewayError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<Behavior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<ParseError>,
    pub validation: ValidationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<ExecutionTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine_error: Option<String>,
    pub failure: Flag,
    pub return_contribution: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_satisfied: Option<bool>,
    /// Perturbations applied during this episode, with the step they preceded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturbations: Vec<(u32, PerturbationEvent)>,
    /// Scheduled perturbations whose step was never reached.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unfired: Vec<PerturbationEvent>,
    /// Injected command latency, supervisory mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery_delay_s: Option<f64>,
}

/// Stacks per zone, bottom first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneMap {
    pub zones: std::collections::BTreeMap<Zone, Vec<Vec<String>>>,
    pub held: Option<String>,
    pub arm_zone: Zone,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridState>,
}

impl ZoneMap {
    pub fn of(world: &WorldState) -> Self {
        let mut zones: std::collections::BTreeMap<Zone, Vec<Vec<String>>> = Default::default();
        for o in world.objects.values() {
            if let Location::Zone(z) = o.location {
                let mut stack = vec![o.descriptor()];
                let mut top = o.id.as_str();
                while let Some(above) = world.objects_on(top).next() {
                    stack.push(above.descriptor());
                    top = &above.id;
                }
                zones.entry(z).or_default().push(stack);
            }
        }
        Self {
            zones,
            held: world.held_object().map(|o| o.descriptor()),
            arm_zone: world.arm_zone,
            grid: world.grid.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub status: SessionStatus,
    pub scenario: ScenarioKind,
    pub mode: OutputMode,
    pub task: Option<String>,
    pub feedback: Vec<String>,
    pub episodes: usize,
    pub ledger: ReturnLedger,
    pub library_version: u64,
    pub observation: Vec<String>,
    pub zone_map: ZoneMap,
    /// Supervisory task time on the session clock, once the goal is met.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_time_s: Option<f64>,
    pub state_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TaskTimer {
    started_s: Option<f64>,
    finished_s: Option<f64>,
}

/// Forwards to the sim and reports perturbations as they fire.
struct Watched<'a> {
    env: &'a mut SimEnv,
    fired: Vec<(u32, PerturbationEvent)>,
    bus: &'a RefCell<EventBus>,
    tau: u32,
    step: u32,
}

impl Environment for Watched<'_> {
    fn execute(&mut self, name: &str, input: &str, prev_output: &str) -> ActionOutcome {
        let before = self.env.applied().len();
        let out = self.env.execute(name, input, prev_output);
        for event in self.env.applied()[before..].to_vec() {
            self.bus.borrow_mut().emit(EventKind::Perturbation {
                tau: Some(self.tau),
                at_step: Some(self.step),
                event: event.clone(),
            });
            self.fired.push((self.step, event));
        }
        self.step += 1;
        out
    }

    fn world(&self) -> Option<&WorldState> {
        Some(&self.env.world)
    }
}

pub struct Session {
    id: String,
    config: SessionConfig,
    task: Option<String>,
    feedback: Vec<String>,
    episodes: Vec<EpisodeRecord>,
    ledger: ReturnLedger,
    status: SessionStatus,
    task_spec: Option<TaskSpec>,
    env: SimEnv,
    template: PromptTemplate,
    observers: ObserverSet,
    gateway: Gateway,
    /// Injected while idle with an `at_step`; armed at the next episode.
    queued: Vec<PerturbationEvent>,
    bus: EventBus,
    clock: Box<dyn Clock>,
    latency: Option<LatencyInjector>,
    timer: TaskTimer,
    log: Option<SessionLog>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("status", &self.status)
            .field("episodes", &self.episodes.len())
            .finish_non_exhaustive()
    }
}

fn default_task_spec(scenario: &Scenario) -> Option<TaskSpec> {
    match scenario {
        Scenario::Coffee => Some(TaskSpec::coffee()),
        Scenario::Pasta => Some(TaskSpec::pasta()),
        Scenario::Supervisory { seed } => Some(TaskSpec::supervisory(*seed)),
        Scenario::Tabletop { .. } => None,
    }
}

impl Session {
    /// A new session with a fresh id, the simulated clock and no log.
    pub fn create(cfg: SessionConfig) -> Result<Self, SessionError> {
        Self::create_with_id(uuid::Uuid::new_v4().to_string(), cfg)
    }

    pub fn create_with_id(id: impl Into<String>, cfg: SessionConfig) -> Result<Self, SessionError> {
        let ledger = ReturnLedger::new(cfg.beta)?;
        let world = cfg
            .scenario
            .reset()
            .map_err(|e| SessionError::BadConfig(e.to_string()))?;
        let template = match &cfg.template {
            Some(p) => PromptTemplate::load(p).map_err(|e| SessionError::BadConfig(e.to_string()))?,
            None => PromptTemplate::builtin_default(),
        };
        let observers = match &cfg.observers {
            Some(specs) => ObserverSet::register(specs.clone()).map_err(|e| SessionError::BadConfig(e.to_string()))?,
            None => ObserverSet::default_for(cfg.scenario.kind()),
        };
        let gateway = Gateway::new(cfg.gateway.clone()).map_err(|e| SessionError::BadConfig(e.to_string()))?;
        if let Some(l) = &cfg.supervisory {
            if !(l.latency_mean_s >= 0.0 && l.latency_mean_s.is_finite()) {
                return Err(SessionError::BadConfig("latency_mean_s must be >= 0".into()));
            }
        }
        let library = cfg.library.clone().unwrap_or_else(|| {
            let lib = ActionLibrary::builtin_default();
            if cfg.scenario.kind() == ScenarioKind::Supervisory {
                lib.subset(SUPERVISORY_BUILTINS)
            } else {
                lib
            }
        });
        let env = SimEnv::new(world, library, cfg.skills.clone());
        Ok(Self {
            id: id.into(),
            task: None,
            feedback: cfg.carryover_feedback.clone(),
            episodes: Vec::new(),
            ledger,
            status: SessionStatus::AwaitingTask,
            task_spec: cfg.task_spec.clone().or_else(|| default_task_spec(&cfg.scenario)),
            env,
            template,
            observers,
            gateway,
            queued: Vec::new(),
            bus: EventBus::default(),
            clock: Box::new(SimClock::default()),
            latency: cfg.supervisory.map(LatencyInjector::new),
            timer: TaskTimer {
                started_s: None,
                finished_s: None,
            },
            log: None,
            config: cfg,
        })
    }

    /// Appends every later command to a new log file at `path`. Call before
    /// the first command.
    pub fn attach_log(mut self, path: impl AsRef<Path>) -> Result<Self, SessionError> {
        self.log = Some(SessionLog::create(path.as_ref(), &self.id, &self.config)?);
        Ok(self)
    }

    /// Rebuilds a session by replaying its log, then keeps appending to it.
    pub fn recover(path: impl AsRef<Path>) -> Result<Self, SessionError> {
        log::recover(path.as_ref())
    }

    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn set_listener(&mut self, listener: Option<EventListener>) {
        self.bus.listener = listener;
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn task(&self) -> Option<&str> {
        self.task.as_deref()
    }

    pub fn task_spec(&self) -> Option<&TaskSpec> {
        self.task_spec.as_ref()
    }

    pub fn feedback(&self) -> &[String] {
        &self.feedback
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    pub fn ledger(&self) -> &ReturnLedger {
        &self.ledger
    }

    pub fn world(&self) -> &WorldState {
        &self.env.world
    }

    pub fn library(&self) -> &ActionLibrary {
        &self.env.library
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.bus.events
    }

    /// Events with an id greater than `after`.
    pub fn events_after(&self, after: u64) -> &[SessionEvent] {
        let events = &self.bus.events;
        &events[events.partition_point(|e| e.id <= after)..]
    }

    pub fn clock_now_s(&self) -> f64 {
        self.clock.now_s()
    }

    /// Supervisory task time, once the goal has been reached.
    pub fn task_time_s(&self) -> Option<f64> {
        Some(self.timer.finished_s? - self.timer.started_s?)
    }

    pub fn observe(&self) -> Observation {
        self.observers.collect(&self.env.world)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            status: self.status,
            scenario: self.config.scenario.kind(),
            mode: self.config.mode,
            task: self.task.clone(),
            feedback: self.feedback.clone(),
            episodes: self.episodes.len(),
            ledger: self.ledger.clone(),
            library_version: self.env.library.version(),
            observation: self.observe().lines,
            zone_map: ZoneMap::of(&self.env.world),
            task_time_s: self.task_time_s(),
            state_hash: self.state_hash(),
        }
    }

    /// SHA-256 over everything that determines future behavior. Measured
    /// latencies and clock readings are left out.
    pub fn state_hash(&self) -> String {
        log::state_hash(self)
    }

    /// `(prompt_hash, response)` for every answered episode, for replay transcripts.
    pub fn transcript(&self) -> Vec<crate::gateway::TranscriptEntry> {
        self.episodes
            .iter()
            .filter_map(|e| {
                e.response.as_ref().map(|r| crate::gateway::TranscriptEntry {
                    prompt_hash: prompt_hash(&e.prompt.rendered),
                    response: r.text.clone(),
                })
            })
            .collect()
    }

    fn emit(&mut self, kind: EventKind) {
        self.bus.emit(kind);
    }

    fn check_open(&self, text: &str) -> Result<(), SessionError> {
        if self.status == SessionStatus::Closed {
            return Err(SessionError::SessionClosed);
        }
        if text.trim().is_empty() {
            return Err(SessionError::EmptyMessage);
        }
        Ok(())
    }

    fn accept_task(&mut self, text: &str) {
        self.task = Some(text.to_string());
        if self.task_spec.is_none() {
            if let Some(goals) = parse_instruction(&self.env.world, text) {
                self.task_spec = Some(TaskSpec {
                    id: format!("{}-task", self.id),
                    scenario: self.config.scenario.clone(),
                    instruction: text.to_string(),
                    goals,
                    ordered: false,
                });
            }
        }
        self.emit(EventKind::TaskSet { text: text.to_string() });
    }

    /// The first message becomes the task, later ones are feedback; then one
    /// full behavior-policy step runs.
    pub fn submit_message(&mut self, text: &str) -> Result<EpisodeRecord, SessionError> {
        self.check_open(text)?;
        if self.task.is_none() {
            self.accept_task(text);
        } else {
            self.feedback.push(text.to_string());
        }
        let task = self.task.clone().expect("set above");
        let record = self.run_episode(text, &task, None);
        self.log_command(LogRecord::Message {
            text: text.to_string(),
            tau: record.tau,
            failure: record.failure,
        })?;
        Ok(record)
    }

    /// One operator command in the supervisory scene, delivered after the
    /// injected latency.
    pub fn supervisory_step(&mut self, text: &str) -> Result<EpisodeRecord, SessionError> {
        if self.config.scenario.kind() != ScenarioKind::Supervisory {
            return Err(SessionError::NotSupervisory);
        }
        self.check_open(text)?;
        if self.task.is_none() {
            self.accept_task(text);
        }
        if self.timer.started_s.is_none() {
            self.timer.started_s = Some(self.clock.now_s());
        }
        let delay = match self.latency.as_mut() {
            Some(l) => l.delay(self.clock.as_mut()),
            None => 0.0,
        };
        let record = self.run_episode(text, text, Some(delay));
        if self.timer.finished_s.is_none() && record.goal_satisfied == Some(true) {
            self.timer.finished_s = Some(self.clock.now_s());
        }
        self.log_command(LogRecord::Supervisory {
            text: text.to_string(),
            tau: record.tau,
            failure: record.failure,
        })?;
        Ok(record)
    }

    /// Queues `event` for the next episode, or applies it now when it has no
    /// step and no episode is running.
    pub fn inject_perturbation(&mut self, event: PerturbationEvent) -> Result<(), SessionError> {
        if self.status == SessionStatus::Closed {
            return Err(SessionError::SessionClosed);
        }
        if self.env.world.object(&event.object_id).is_none() {
            return Err(SessionError::UnknownObject(event.object_id));
        }
        if let Location::OnTopOf(t) = &event.new_location {
            if self.env.world.object(t).is_none() {
                return Err(SessionError::UnknownObject(t.clone()));
            }
        }
        match event.at_step {
            None => {
                self.env.world = self
                    .env
                    .world
                    .perturb(&event)
                    .map_err(|e| SessionError::InvalidPerturbation(e.to_string()))?;
                self.emit(EventKind::Perturbation {
                    tau: None,
                    at_step: None,
                    event: event.clone(),
                });
            }
            Some(_) => self.queued.push(event.clone()),
        }
        self.log_command(LogRecord::Perturb { event })
    }

    pub fn close(&mut self) -> Result<(), SessionError> {
        if self.status != SessionStatus::Closed {
            self.status = SessionStatus::Closed;
            self.log_command(LogRecord::Close)?;
        }
        Ok(())
    }

    fn log_command(&mut self, record: LogRecord) -> Result<(), SessionError> {
        match self.log.as_mut() {
            Some(log) => log.append(&record),
            None => Ok(()),
        }
    }

    fn run_episode(&mut self, message: &str, task_text: &str, delay: Option<f64>) -> EpisodeRecord {
        self.status = SessionStatus::Executing;
        let tau = self.episodes.len() as u32;
        if self.config.reset_each_episode && tau > 0 {
            self.env.world = self.config.scenario.reset().expect("reset succeeded at creation");
        }
        self.env.schedule(std::mem::take(&mut self.queued));
        self.env.schedule(self.config.perturb_each_episode.clone());
        self.env.begin_episode();

        let obs = self.observe();
        let prompt = build_prompt(
            &self.template,
            &self.env.library.render_description(),
            &obs,
            task_text,
            &self.feedback,
            self.config.mode,
        )
        .expect("task text checked non-empty");
        self.emit(EventKind::PromptBuilt {
            tau,
            world_version: prompt.world_version,
            feedback_count: self.feedback.len(),
            prompt_hash: prompt_hash(&prompt.rendered),
        });

        let ctx = CompletionContext {
            task: self.task_spec.as_ref(),
            world: &self.env.world,
            feedback: &self.feedback,
            message,
        };
        let completion = self.gateway.complete(&prompt, &ctx);
        let mut record = EpisodeRecord {
            tau,
            message: message.to_string(),
            prompt,
            response: None,
            gateway_error: None,
            behavior: None,
            parse_error: None,
            validation: ValidationReport::default(),
            trace: None,
            engine_error: None,
            failure: Flag::Failure,
            return_contribution: 0.0,
            goal_satisfied: None,
            perturbations: Vec::new(),
            unfired: Vec::new(),
            delivery_delay_s: delay,
        };
        match completion {
            Ok(r) => {
                self.emit(EventKind::LlmResponse {
                    tau,
                    text: r.text.clone(),
                    latency_ms: r.latency_ms,
                    backend_id: r.backend_id.clone(),
                    error: None,
                });
                record.response = Some(r);
            }
            Err(e) => {
                self.emit(EventKind::LlmResponse {
                    tau,
                    text: String::new(),
                    latency_ms: 0,
                    backend_id: self.gateway.backend_id(),
                    error: Some(e.clone()),
                });
                record.gateway_error = Some(e);
            }
        }

        if let Some(r) = &record.response {
            match parse_response(&r.text) {
                Ok(b) => {
                    record.validation = self.env.library.validate_behavior_names(&b);
                    record.behavior = Some(b);
                }
                Err(e) => record.parse_error = Some(e),
            }
            self.emit(EventKind::BehaviorParsed {
                tau,
                mode: record.behavior.as_ref().map(Behavior::mode),
                actions: record
                    .behavior
                    .as_ref()
                    .map(|b| b.action_names().into_iter().map(String::from).collect())
                    .unwrap_or_default(),
                unknown: record.validation.unknown.clone(),
                error: record.parse_error.clone(),
            });
        }

        if let Some(b) = record.behavior.clone().filter(|_| record.validation.is_empty()) {
            let library = self.env.library.clone();
            let bus = RefCell::new(std::mem::take(&mut self.bus));
            let mut watched = Watched {
                env: &mut self.env,
                fired: Vec::new(),
                bus: &bus,
                tau,
                step: 0,
            };
            let result = run_behavior_observed(&b, &library, &mut watched, &mut |s| {
                bus.borrow_mut().emit(EventKind::StepExecuted { tau, step: s.clone() })
            });
            record.perturbations = watched.fired;
            self.bus = bus.into_inner();
            match result {
                Ok(trace) => {
                    record.failure = trace.behavior_failure;
                    record.trace = Some(trace);
                }
                Err(e) => record.engine_error = Some(e.to_string()),
            }
        }
        record.unfired = self.env.end_episode();

        record.return_contribution = self.ledger.push(record.failure);
        record.goal_satisfied = self.task_spec.as_ref().map(|t| t.is_satisfied(&self.env.world));
        self.emit(EventKind::EpisodeDone {
            tau,
            failure: record.failure,
            return_contribution: record.return_contribution,
            ledger_value: self.ledger.value,
            goal_satisfied: record.goal_satisfied,
        });
        self.episodes.push(record.clone());
        self.status = SessionStatus::AwaitingFeedback;
        record
    }
}

/// Shared handle used by servers: one writer at a time per session.
pub type SharedSession = Arc<std::sync::Mutex<Session>>;

#[cfg(test)]
mod tests;
