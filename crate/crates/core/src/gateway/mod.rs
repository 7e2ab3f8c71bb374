//! Completions for a prompt: a chat-completions HTTP client plus
//! deterministic mock backends for tests and benchmarks.

mod http;
mod mock;
mod replay;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompt::Prompt;
use crate::sim::{TaskSpec, WorldState};

pub use mock::{corrupt, mutations, scripted_command, Mutation};
pub use replay::{load_transcript, TranscriptEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Http {
        base_url: String,
        model_name: String,
        /// Environment variable holding the bearer token; unset means no auth header.
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
    Replay {
        transcript_path: PathBuf,
    },
    /// Emits the ground-truth plan for the session's task.
    Oracle,
    /// The oracle's plan with exactly one mutation until feedback arrives.
    Corrupting {
        seed: u64,
    },
    /// Maps operator commands through a fixed phrase table; anything outside
    /// it gets a reply with no fenced block.
    Scripted,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub backend: Backend,
    #[serde(default)]
    pub temperature: f64,
}

impl GatewayConfig {
    pub fn new(backend: Backend) -> Self {
        Self {
            backend,
            temperature: 0.0,
        }
    }

    pub fn oracle() -> Self {
        Self::new(Backend::Oracle)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::BadConfig("temperature must be >= 0".into()));
        }
        if let Backend::Http { timeout_s, .. } = &self.backend {
            if !(*timeout_s > 0.0 && timeout_s.is_finite()) {
                return Err(GatewayError::BadConfig("timeout_s must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// `oracle`, `scripted`, `corrupting:SEED`, `replay:PATH` or `http:URL`
/// (model from `NLROBOT_MODEL`, key from `NLROBOT_API_KEY`).
impl FromStr for GatewayConfig {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let backend = match (kind, arg) {
            ("oracle", "") => Backend::Oracle,
            ("scripted", "") => Backend::Scripted,
            ("corrupting", seed) => Backend::Corrupting {
                seed: seed
                    .parse()
                    .map_err(|_| GatewayError::BadConfig(format!("bad corrupting seed `{seed}`")))?,
            },
            ("replay", path) if !path.is_empty() => Backend::Replay {
                transcript_path: path.into(),
            },
            ("http", url) if !url.is_empty() => Backend::Http {
                base_url: url.to_string(),
                model_name: std::env::var("NLROBOT_MODEL").unwrap_or_else(|_| "default".into()),
                api_key_env: Some("NLROBOT_API_KEY".into()),
                timeout_s: default_timeout(),
                max_retries: default_retries(),
            },
            _ => return Err(GatewayError::BadConfig(format!("unknown gateway `{s}`"))),
        };
        Ok(GatewayConfig::new(backend))
    }
}

impl fmt::Display for GatewayConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.backend {
            Backend::Http { base_url, .. } => write!(f, "http:{base_url}"),
            Backend::Replay { transcript_path } => write!(f, "replay:{}", transcript_path.display()),
            Backend::Oracle => f.write_str("oracle"),
            Backend::Corrupting { seed } => write!(f, "corrupting:{seed}"),
            Backend::Scripted => f.write_str("scripted"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub latency_ms: u64,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("no transcript entry for prompt hash {0}")]
    NoTranscriptEntry(String),
    #[error("bad gateway config: {0}")]
    BadConfig(String),
}

/// What the mock backends may look at besides the prompt. The HTTP and
/// replay backends ignore it.
#[derive(Debug, Clone, Copy)]
pub struct CompletionContext<'a> {
    pub task: Option<&'a TaskSpec>,
    pub world: &'a WorldState,
    pub feedback: &'a [String],
    /// The newest human message.
    pub message: &'a str,
}

/// Lowercase hex SHA-256 of the rendered prompt.
pub fn prompt_hash(rendered: &str) -> String {
    hex::encode(Sha256::digest(rendered.as_bytes()))
}

/// A constructed backend. Immutable after construction, so calls from
/// several sessions may run at once.
#[derive(Debug, Clone)]
pub struct Gateway {
    config: GatewayConfig,
    transcript: Option<std::collections::HashMap<String, String>>,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let transcript = match &config.backend {
            Backend::Replay { transcript_path } => Some(load_transcript(transcript_path)?),
            _ => None,
        };
        Ok(Self { config, transcript })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn backend_id(&self) -> String {
        self.config.to_string()
    }

    pub fn complete(&self, prompt: &Prompt, ctx: &CompletionContext<'_>) -> Result<LlmResponse, GatewayError> {
        let started = std::time::Instant::now();
        let text = match &self.config.backend {
            Backend::Http {
                base_url,
                model_name,
                api_key_env,
                timeout_s,
                max_retries,
            } => http::complete(
                &http::HttpParams {
                    base_url,
                    model_name,
                    api_key_env: api_key_env.as_deref(),
                    timeout_s: *timeout_s,
                    max_retries: *max_retries,
                    temperature: self.config.temperature,
                },
                prompt,
            )?,
            Backend::Replay { .. } => {
                let hash = prompt_hash(&prompt.rendered);
                self.transcript
                    .as_ref()
                    .and_then(|t| t.get(&hash))
                    .cloned()
                    .ok_or(GatewayError::NoTranscriptEntry(hash))?
            }
            Backend::Oracle => mock::oracle_reply(prompt.mode, ctx),
            Backend::Corrupting { seed } => mock::corrupting_reply(*seed, prompt.mode, ctx),
            Backend::Scripted => mock::scripted_reply(prompt.mode, ctx.message),
        };
        // mocks answer instantly; only real requests report wall time
        let latency_ms = match self.config.backend {
            Backend::Http { .. } => started.elapsed().as_millis() as u64,
            _ => 0,
        };
        Ok(LlmResponse {
            text,
            latency_ms,
            backend_id: self.backend_id(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_strings_round_trip() {
        for s in ["oracle", "scripted", "corrupting:7", "replay:/tmp/t.jsonl", "http:http://localhost:8000/v1"] {
            let cfg: GatewayConfig = s.parse().unwrap();
            assert_eq!(cfg.to_string(), s);
        }
        assert!("corrupting:x".parse::<GatewayConfig>().is_err());
        assert!("gpt".parse::<GatewayConfig>().is_err());
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            prompt_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn bad_temperature() {
        let mut cfg = GatewayConfig::oracle();
        cfg.temperature = -1.0;
        assert!(matches!(Gateway::new(cfg), Err(GatewayError::BadConfig(_))));
    }
}
