//! Batch front-end: TOML run files, seeded job execution and manifests.

pub mod config;
pub mod manifest;
pub mod runner;

pub use config::{load_run_file, parse_run_file, CliError, RunFile};
pub use manifest::{JobRecord, JobStatus, Manifest, OutputRecord};
pub use runner::{list_experiments, run, validate, RunOptions};
