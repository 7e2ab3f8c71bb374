use std::time::Duration;

use serde_json::{json, Value};

use super::GatewayError;
use crate::prompt::Prompt;

pub(super) struct HttpParams<'a> {
    pub base_url: &'a str,
    pub model_name: &'a str,
    pub api_key_env: Option<&'a str>,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub temperature: f64,
}

const BACKOFF_BASE: Duration = Duration::from_millis(250);

/// POST `{base_url}/chat/completions` with the preamble as the system
/// message. Transport errors and timeouts are retried with doubling delays.
pub(super) fn complete(p: &HttpParams<'_>, prompt: &Prompt) -> Result<String, GatewayError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(p.timeout_s)))
        .http_status_as_error(false)
        .build()
        .into();
    let url = format!("{}/chat/completions", p.base_url.trim_end_matches('/'));
    let body = json!({
        "model": p.model_name,
        "temperature": p.temperature,
        "messages": [
            {"role": "system", "content": prompt.system_text()},
            {"role": "user", "content": prompt.user_text()},
        ],
    });
    let key = p.api_key_env.and_then(|var| std::env::var(var).ok());
    let mut attempt = 0;
    loop {
        let mut req = agent.post(&url);
        if let Some(k) = &key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let err = match req.send_json(&body) {
            Ok(resp) if resp.status().is_success() => {
                let v: Value = resp
                    .into_body()
                    .read_json()
                    .map_err(|e| GatewayError::TransportError(format!("bad reply body: {e}")))?;
                return Ok(v["choices"][0]["message"]["content"].as_str().unwrap_or_default().to_string());
            }
            Ok(resp) if resp.status().is_server_error() => {
                GatewayError::TransportError(format!("HTTP {}", resp.status().as_u16()))
            }
            Ok(resp) => return Err(GatewayError::TransportError(format!("HTTP {}", resp.status().as_u16()))),
            Err(ureq::Error::Timeout(_)) => GatewayError::Timeout,
            Err(e) => GatewayError::TransportError(e.to_string()),
        };
        if attempt >= p.max_retries {
            return Err(err);
        }
        std::thread::sleep(BACKOFF_BASE * 2u32.pow(attempt));
        attempt += 1;
    }
}
