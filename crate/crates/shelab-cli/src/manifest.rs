//! Run manifests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    /// Ran to completion.
    Ok,
    /// Completed, but part of the measurement exceeded a resource cap.
    Blocked,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Path relative to the output directory.
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobError {
    pub exit_code: i32,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub experiment: String,
    pub config_hash: String,
    /// Stable hash of the job id.
    pub stream_id: u64,
    pub seed: u64,
    pub status: JobStatus,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub checks_passed: usize,
    pub checks_failed: usize,
    pub outputs: Vec<OutputRecord>,
    pub error: Option<JobError>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    /// SHA-256 of the canonical run file.
    pub config_hash: String,
    pub master_seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
    pub jobs: Vec<JobRecord>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Write through a temporary file so an interrupted write never leaves a
    /// truncated manifest.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&tmp, text).map_err(|e| CliError::io(format!("cannot write manifest: {e}")))?;
        std::fs::rename(&tmp, dir.join(MANIFEST_FILE)).map_err(|e| CliError::io(format!("cannot write manifest: {e}")))
    }

    pub fn job(&self, id: &str) -> Option<&JobRecord> {
        self.jobs.iter().find(|j| j.id == id)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// True when every recorded output exists with its recorded checksum.
pub fn outputs_intact(dir: &Path, job: &JobRecord) -> bool {
    !job.outputs.is_empty()
        && job.outputs.iter().all(|o| match std::fs::read(dir.join(&o.file)) {
            Ok(b) => b.len() as u64 == o.bytes && sha256_hex(&b) == o.sha256,
            Err(_) => false,
        })
}

pub fn now_unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
