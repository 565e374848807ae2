//! Structured experiment reports.
//!
//! A report captures the run's seed, a hash of the resolved configuration,
//! metric values, and the paths of every artifact written. Re-running with
//! the same config and seed reproduces the metric values exactly; the
//! `created_unix_seconds` field is the only volatile entry.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DekError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub created_unix_seconds: u64,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ExperimentReport {
            command: command.to_string(),
            seed,
            config_hash,
            created_unix_seconds: created,
            metrics: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn artifact(&mut self, name: &str, path: &Path) -> &mut Self {
        self.artifacts
            .insert(name.to_string(), path.display().to_string());
        self
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| DekError::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| DekError::ModelFormat {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(|e| DekError::io(path, e))?;
        w.flush().map_err(|e| DekError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| DekError::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| DekError::ModelFormat {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// The report with its volatile field blanked, for determinism checks.
    pub fn stable_view(&self) -> ExperimentReport {
        let mut view = self.clone();
        view.created_unix_seconds = 0;
        view
    }
}

/// SHA-256 of a canonical config serialization, hex-encoded.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| DekError::InvalidConfig(e.to_string()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_encode(&hasher.finalize()))
}

fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
