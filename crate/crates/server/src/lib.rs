//! HTTP API over sessions, versioned under `/v1`.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/v1/sessions` | `SessionConfig` | `SessionView` |
//! | GET | `/v1/sessions` | | ids |
//! | POST | `/v1/sessions/{id}/message` | `{"text"}` | `EpisodeRecord` |
//! | POST | `/v1/sessions/{id}/perturb` | `PerturbationEvent` | `SessionView` |
//! | POST | `/v1/sessions/{id}/close` | | `SessionView` |
//! | GET | `/v1/sessions/{id}/state` | | `SessionView` |
//! | GET | `/v1/sessions/{id}/trace` | | `[EpisodeRecord]` |
//! | GET | `/v1/sessions/{id}/events` | | SSE, one `SessionEvent` per message |
//! | GET | `/v1/actions` | | `ActionLibrary` |
//! | POST | `/v1/actions/demonstrate?description=..&n_basis=..` | demo CSV | new action spec |
//!
//! Commands on one session run one at a time on a blocking thread; reads
//! are served from a snapshot refreshed after every command, so polling
//! `state` never waits behind a running episode.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use nlrobot_core::dmp::{fit, register_skill, DemonstrationTrajectory, Gains, SkillStore};
use nlrobot_core::session::{EpisodeRecord, Session, SessionConfig, SessionError, SessionEvent, SessionStatus, SessionView};
use nlrobot_core::sim::{PerturbationEvent, ScenarioKind};
use nlrobot_core::ActionLibrary;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast;

const EVENT_BUFFER: usize = 1024;
pub const DEFAULT_N_BASIS: usize = 50;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no session `{id}`"))
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::SessionClosed => StatusCode::CONFLICT,
            SessionError::Io(_) | SessionError::ReplayDivergence { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone)]
struct Snapshot {
    view: SessionView,
    episodes: Vec<EpisodeRecord>,
}

struct Entry {
    session: Arc<Mutex<Session>>,
    snapshot: RwLock<Snapshot>,
    history: Arc<RwLock<Vec<SessionEvent>>>,
    events: broadcast::Sender<SessionEvent>,
}

impl Entry {
    fn new(mut session: Session) -> Arc<Self> {
        let (tx, _) = broadcast::channel(EVENT_BUFFER);
        let history = Arc::new(RwLock::new(session.events().to_vec()));
        let (h, t) = (history.clone(), tx.clone());
        session.set_listener(Some(Arc::new(move |e: &SessionEvent| {
            h.write().expect("history lock").push(e.clone());
            let _ = t.send(e.clone());
        })));
        let snapshot = RwLock::new(Snapshot {
            view: session.view(),
            episodes: session.episodes().to_vec(),
        });
        Arc::new(Self {
            session: Arc::new(Mutex::new(session)),
            snapshot,
            history,
            events: tx,
        })
    }

    fn refresh(&self, s: &Session) {
        *self.snapshot.write().expect("snapshot lock") = Snapshot {
            view: s.view(),
            episodes: s.episodes().to_vec(),
        };
    }

    fn view(&self) -> SessionView {
        self.snapshot.read().expect("snapshot lock").view.clone()
    }

    /// Runs `f` on the session off the async runtime, then refreshes the snapshot.
    async fn command<T: Send + 'static>(
        self: &Arc<Self>,
        f: impl FnOnce(&mut Session) -> Result<T, SessionError> + Send + 'static,
    ) -> Result<T, ApiError> {
        let me = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut s = me.session.lock().expect("session lock");
            let out = f(&mut s);
            me.refresh(&s);
            out
        })
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
    }
}

/// Server-wide state: sessions, the shared action library and skill store.
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    library: RwLock<ActionLibrary>,
    skills: RwLock<SkillStore>,
    /// Session logs go here when set.
    data_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(data_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            sessions: RwLock::new(HashMap::new()),
            library: RwLock::new(ActionLibrary::builtin_default()),
            skills: RwLock::new(SkillStore::default()),
            data_dir,
        })
    }

    /// Rebuilds every session found in `data_dir` from its log.
    pub fn recover_all(&self) -> Result<usize, SessionError> {
        let Some(dir) = &self.data_dir else { return Ok(0) };
        let Ok(entries) = std::fs::read_dir(dir) else { return Ok(0) };
        let mut n = 0;
        for e in entries.flatten() {
            let path = e.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                let s = Session::recover(&path)?;
                self.sessions
                    .write()
                    .expect("sessions lock")
                    .insert(s.id().to_string(), Entry::new(s));
                n += 1;
            }
        }
        Ok(n)
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}/message", post(message))
        .route("/v1/sessions/{id}/perturb", post(perturb))
        .route("/v1/sessions/{id}/close", post(close))
        .route("/v1/sessions/{id}/state", get(state_of))
        .route("/v1/sessions/{id}/trace", get(trace))
        .route("/v1/sessions/{id}/events", get(events))
        .route("/v1/actions", get(actions))
        .route("/v1/actions/demonstrate", post(demonstrate))
        .with_state(state)
}

async fn create_session(State(app): State<Arc<AppState>>, Json(mut cfg): Json<SessionConfig>) -> ApiResult<SessionView> {
    if cfg.library.is_none() && cfg.scenario.kind() != ScenarioKind::Supervisory {
        cfg.library = Some(app.library.read().expect("library lock").clone());
    }
    if cfg.skills.skills.is_empty() {
        cfg.skills = app.skills.read().expect("skills lock").clone();
    }
    let mut session = Session::create(cfg)?;
    if let Some(dir) = &app.data_dir {
        std::fs::create_dir_all(dir).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        let path = dir.join(format!("{}.jsonl", session.id()));
        session = session.attach_log(path)?;
    }
    let id = session.id().to_string();
    let entry = Entry::new(session);
    let view = entry.view();
    app.sessions.write().expect("sessions lock").insert(id, entry);
    Ok(Json(view))
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = app.sessions.read().expect("sessions lock").keys().cloned().collect();
    ids.sort();
    Json(ids)
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

async fn message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<MessageBody>,
) -> ApiResult<EpisodeRecord> {
    let entry = app.entry(&id)?;
    {
        // visible to pollers while the episode runs
        let mut snap = entry.snapshot.write().expect("snapshot lock");
        if snap.view.status != SessionStatus::Closed {
            snap.view.status = SessionStatus::Executing;
        }
    }
    let rec = entry
        .command(move |s| {
            if s.config().scenario.kind() == ScenarioKind::Supervisory {
                s.supervisory_step(&body.text)
            } else {
                s.submit_message(&body.text)
            }
        })
        .await?;
    Ok(Json(rec))
}

async fn perturb(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(event): Json<PerturbationEvent>,
) -> ApiResult<SessionView> {
    let entry = app.entry(&id)?;
    entry.command(move |s| s.inject_perturbation(event)).await?;
    Ok(Json(entry.view()))
}

async fn close(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let entry = app.entry(&id)?;
    entry.command(|s| s.close()).await?;
    Ok(Json(entry.view()))
}

async fn state_of(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    Ok(Json(app.entry(&id)?.view()))
}

async fn trace(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Vec<EpisodeRecord>> {
    Ok(Json(app.entry(&id)?.snapshot.read().expect("snapshot lock").episodes.clone()))
}

#[derive(Deserialize)]
struct EventsQuery {
    /// Same as the `Last-Event-ID` header, for clients that cannot set it.
    after: Option<u64>,
}

fn sse_event(e: &SessionEvent) -> Event {
    Event::default()
        .id(e.id.to_string())
        .event(e.kind.name())
        .data(serde_json::to_string(e).expect("plain event"))
}

/// Replays history after the given id, then follows live events.
async fn events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let entry = app.entry(&id)?;
    let after = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .or(q.after)
        .unwrap_or(0);
    // subscribe before reading history so nothing falls in between
    let rx = entry.events.subscribe();
    let past: Vec<SessionEvent> = entry
        .history
        .read()
        .expect("history lock")
        .iter()
        .filter(|e| e.id > after)
        .cloned()
        .collect();
    let last = past.last().map_or(after, |e| e.id);
    let history = entry.history.clone();
    let replay = stream::iter(past.into_iter().map(|e| Ok(sse_event(&e))));
    let live = stream::unfold((rx, last, history), |(mut rx, mut last, history)| async move {
        loop {
            match rx.recv().await {
                Ok(e) if e.id <= last => continue,
                Ok(e) => {
                    last = e.id;
                    return Some((vec![e], (rx, last, history)));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    // fell behind the buffer: catch up from the history
                    let missed: Vec<SessionEvent> = history
                        .read()
                        .expect("history lock")
                        .iter()
                        .filter(|e| e.id > last)
                        .cloned()
                        .collect();
                    if let Some(e) = missed.last() {
                        last = e.id;
                        return Some((missed, (rx, last, history)));
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
    .flat_map(|batch| stream::iter(batch.into_iter().map(|e| Ok(sse_event(&e)))));
    Ok(Sse::new(replay.chain(live)).keep_alive(KeepAlive::default()))
}

async fn actions(State(app): State<Arc<AppState>>) -> Json<ActionLibrary> {
    Json(app.library.read().expect("library lock").clone())
}

#[derive(Deserialize)]
struct DemoQuery {
    description: String,
    n_basis: Option<usize>,
}

/// Fits a DMP to the uploaded CSV demo and adds it to the library as a new
/// action. Sessions created afterwards can use it.
async fn demonstrate(
    State(app): State<Arc<AppState>>,
    Query(q): Query<DemoQuery>,
    body: String,
) -> Result<Json<serde_json::Value>, ApiError> {
    let bad = |e: nlrobot_core::dmp::DmpError| ApiError::new(StatusCode::BAD_REQUEST, e.to_string());
    let demo = DemonstrationTrajectory::from_csv_reader(body.as_bytes(), q.description.clone()).map_err(bad)?;
    let model = fit(&demo, q.n_basis.unwrap_or(DEFAULT_N_BASIS), Gains::default()).map_err(bad)?;
    let mut lib = app.library.write().expect("library lock");
    let mut skills = app.skills.write().expect("skills lock");
    let (next, name) = register_skill(&mut skills, model, &q.description, &lib).map_err(bad)?;
    *lib = next;
    let spec = lib.get(&name).cloned();
    Ok(Json(json!({ "name": name, "action": spec, "library_version": lib.version() })))
}
