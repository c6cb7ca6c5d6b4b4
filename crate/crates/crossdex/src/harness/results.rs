//! Result persistence: one JSON artifact carrying the config echo, run
//! metadata, and the full matrix. Loads verify the format version and
//! the config hash.

use super::{ExperimentConfig, HarnessError, ResultMatrix};
use crate::RESULTS_FORMAT_VERSION;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_hash: String,
    /// RFC 3339 timestamp; callers control it so artifacts can be
    /// byte-reproducible.
    pub created_at: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersistedResults {
    pub version: u32,
    pub metadata: RunMetadata,
    pub config: ExperimentConfig,
    pub matrix: ResultMatrix,
}

/// Results plus the integrity verdict of the stored config hash.
#[derive(Debug, Clone)]
pub struct LoadedResults {
    pub results: PersistedResults,
    /// False when the embedded config does not hash to the recorded
    /// value (the file was edited after the run).
    pub integrity_ok: bool,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let canon = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the artifact; `created_at` is caller-supplied so two runs of
/// the same config can produce byte-identical files.
pub fn persist_results(
    matrix: &ResultMatrix,
    config: &ExperimentConfig,
    created_at: &str,
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let artifact = PersistedResults {
        version: RESULTS_FORMAT_VERSION,
        metadata: RunMetadata {
            seed: config.seed,
            config_hash: config_hash(config),
            created_at: created_at.to_string(),
        },
        config: config.clone(),
        matrix: matrix.clone(),
    };
    let body = serde_json::to_string_pretty(&artifact).expect("results serialize");
    std::fs::write(path, body).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_results(path: impl AsRef<Path>) -> Result<LoadedResults, HarnessError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    // Peek the version before committing to the full schema.
    let probe: serde_json::Value =
        serde_json::from_str(&raw).map_err(|e| HarnessError::BadResults(e.to_string()))?;
    let found = probe
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| HarnessError::BadResults("missing version field".into()))?
        as u32;
    if found != RESULTS_FORMAT_VERSION {
        return Err(HarnessError::VersionMismatch {
            found,
            expected: RESULTS_FORMAT_VERSION,
        });
    }
    let results: PersistedResults =
        serde_json::from_str(&raw).map_err(|e| HarnessError::BadResults(e.to_string()))?;
    let integrity_ok = config_hash(&results.config) == results.metadata.config_hash;
    Ok(LoadedResults {
        results,
        integrity_ok,
    })
}
