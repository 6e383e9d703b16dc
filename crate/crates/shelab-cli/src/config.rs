//! Run files.
//!
//! A run file is TOML with a master `seed` and one table per job:
//!
//! ```toml
//! seed = 42
//!
//! [jobs.ladder]
//! experiment = "l2"
//! t_values = [1e3, 1e4]
//! ```
//!
//! Omitted keys take the experiment defaults. Times are microscopic unless a
//! key says otherwise (`t_macro`, `t`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shelab::experiments::ExperimentConfig;

/// Failure with its process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }

    /// Library error raised inside job `job`, with config keys prefixed by
    /// the job path.
    pub fn from_job(job: &str, e: &shelab::Error) -> Self {
        let message = match e {
            shelab::Error::Config { key, msg } => format!("config error at `jobs.{job}.{key}`: {msg}"),
            other => format!("jobs.{job}: {other}"),
        };
        Self {
            code: e.exit_code(),
            message,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub seed: u64,
    pub jobs: BTreeMap<String, ExperimentConfig>,
}

impl RunFile {
    /// Job ids become file names, so they are restricted to `[A-Za-z0-9_-]`.
    pub fn check_ids(&self) -> Result<(), CliError> {
        if self.jobs.is_empty() {
            return Err(CliError::config("config error at `jobs`: at least one job is required"));
        }
        for id in self.jobs.keys() {
            if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(CliError::config(format!(
                    "config error at `jobs.{id}`: job ids may only contain letters, digits, '_' and '-'"
                )));
            }
        }
        Ok(())
    }

    /// Canonical JSON, the input of the content hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("run files serialise")
    }
}

pub fn parse_run_file(text: &str) -> Result<RunFile, CliError> {
    let file: RunFile = toml::from_str(text).map_err(|e| CliError::config(format!("config error: {e}")))?;
    file.check_ids()?;
    Ok(file)
}

pub fn load_run_file(path: &Path) -> Result<RunFile, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_run_file(&text)
}
