//! Append-only JSON Lines command log. The first line records the session id
//! and config; every later line is one accepted command. Replaying the
//! commands against the same config rebuilds the session.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EpisodeRecord, Session, SessionConfig, SessionError, SessionStatus};
use crate::sim::PerturbationEvent;
use crate::Flag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Create { id: String, config: Box<SessionConfig> },
    /// `tau` and `failure` are checked when replaying.
    Message { text: String, tau: u32, failure: Flag },
    Supervisory { text: String, tau: u32, failure: Flag },
    Perturb { event: PerturbationEvent },
    Close,
}

#[derive(Debug)]
pub struct SessionLog {
    path: PathBuf,
    file: File,
}

fn io(e: impl std::fmt::Display) -> SessionError {
    SessionError::Io(e.to_string())
}

impl SessionLog {
    pub fn create(path: &Path, id: &str, config: &SessionConfig) -> Result<Self, SessionError> {
        let file = OpenOptions::new().write(true).create_new(true).open(path).map_err(io)?;
        let mut log = Self {
            path: path.to_path_buf(),
            file,
        };
        log.append(&LogRecord::Create {
            id: id.to_string(),
            config: Box::new(config.clone()),
        })?;
        Ok(log)
    }

    fn reopen(path: &Path) -> Result<Self, SessionError> {
        let file = OpenOptions::new().append(true).open(path).map_err(io)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one line and flushes it to disk.
    pub fn append(&mut self, record: &LogRecord) -> Result<(), SessionError> {
        let mut line = serde_json::to_string(record).map_err(io)?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}

/// Reads the records, dropping a torn final line left by a crash mid-write
/// and truncating the file back to the last complete record.
pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, SessionError> {
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut records = Vec::new();
    let mut good_len = 0u64;
    let mut torn = false;
    for line in reader.split(b'\n') {
        let line = line.map_err(io)?;
        if torn {
            return Err(SessionError::Io("corrupt record before the end of the log".into()));
        }
        match serde_json::from_slice::<LogRecord>(&line) {
            Ok(r) => {
                records.push(r);
                good_len += line.len() as u64 + 1;
            }
            Err(_) if line.iter().all(u8::is_ascii_whitespace) => good_len += line.len() as u64 + 1,
            Err(_) => torn = true,
        }
    }
    let actual = std::fs::metadata(path).map_err(io)?.len();
    if good_len < actual {
        OpenOptions::new()
            .write(true)
            .open(path)
            .and_then(|f| f.set_len(good_len))
            .map_err(io)?;
    }
    Ok(records)
}

pub(super) fn recover(path: &Path) -> Result<Session, SessionError> {
    let mut records = read_log(path)?.into_iter();
    let Some(LogRecord::Create { id, config }) = records.next() else {
        return Err(SessionError::Io("log does not start with a create record".into()));
    };
    let mut session = Session::create_with_id(id, *config)?;
    for record in records {
        match record {
            LogRecord::Create { .. } => return Err(SessionError::Io("duplicate create record".into())),
            LogRecord::Message { text, tau, failure } => {
                check(&session.submit_message(&text)?, tau, failure)?;
            }
            LogRecord::Supervisory { text, tau, failure } => {
                check(&session.supervisory_step(&text)?, tau, failure)?;
            }
            LogRecord::Perturb { event } => session.inject_perturbation(event)?,
            LogRecord::Close => session.close()?,
        }
    }
    session.log = Some(SessionLog::reopen(path)?);
    Ok(session)
}

fn check(record: &EpisodeRecord, tau: u32, failure: Flag) -> Result<(), SessionError> {
    if record.tau == tau && record.failure == failure {
        Ok(())
    } else {
        Err(SessionError::ReplayDivergence { tau })
    }
}

#[derive(Serialize)]
struct HashedState<'a> {
    id: &'a str,
    config: &'a SessionConfig,
    task: &'a Option<String>,
    feedback: &'a [String],
    episodes: Vec<EpisodeRecord>,
    ledger: &'a crate::engine::ReturnLedger,
    status: SessionStatus,
    world: &'a crate::sim::WorldState,
    library: &'a crate::registry::ActionLibrary,
    queued: &'a [PerturbationEvent],
}

pub(super) fn state_hash(s: &Session) -> String {
    let episodes = s
        .episodes
        .iter()
        .cloned()
        .map(|mut e| {
            if let Some(r) = e.response.as_mut() {
                r.latency_ms = 0;
            }
            e
        })
        .collect();
    let state = HashedState {
        id: &s.id,
        config: &s.config,
        task: &s.task,
        feedback: &s.feedback,
        episodes,
        ledger: &s.ledger,
        status: s.status,
        world: &s.env.world,
        library: &s.env.library,
        queued: &s.queued,
    };
    let bytes = serde_json::to_vec(&state).expect("session state serializes");
    hex::encode(Sha256::digest(&bytes))
}
