use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GatewayError;

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt_hash: String,
    pub response: String,
}

/// Reads a JSON Lines transcript. Later entries for the same hash win.
pub fn load_transcript(path: &Path) -> Result<HashMap<String, String>, GatewayError> {
    let file = std::fs::File::open(path)
        .map_err(|e| GatewayError::BadConfig(format!("transcript {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GatewayError::BadConfig(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: TranscriptEntry = serde_json::from_str(&line)
            .map_err(|e| GatewayError::BadConfig(format!("transcript line {}: {e}", i + 1)))?;
        map.insert(entry.prompt_hash, entry.response);
    }
    Ok(map)
}
