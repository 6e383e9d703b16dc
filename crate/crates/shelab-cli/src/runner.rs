//! Validation and execution of run files.
//!
//! Jobs run one after another in id order; each uses the replica-level
//! parallelism of the library. Job `id` draws its seed from
//! `derive([master_seed, hash(id)])`, so adding or removing jobs never changes
//! the others. The manifest is rewritten after every job.

use std::path::{Path, PathBuf};

use shelab::experiments::{ExperimentConfig, Resources, StatReport, CATALOG};
use shelab::rng::{derive, hash_str};

use crate::config::{CliError, RunFile};
use crate::manifest::{
    now_unix_ms, outputs_intact, sha256_hex, JobError, JobRecord, JobStatus, Manifest, OutputRecord,
};

/// Thread cap when `--threads` is absent.
pub const THREADS_ENV: &str = "SHELAB_THREADS";
/// Jobs whose memory estimate exceeds this many bytes are refused.
pub const MAX_BYTES_ENV: &str = "SHELAB_MAX_BYTES";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub resume: bool,
}

/// Catalog lines `id<TAB>description<TAB>keys`.
pub fn list_experiments() -> String {
    let mut s = String::new();
    for e in CATALOG.iter() {
        s.push_str(&format!("{}\t{}\t{}\n", e.id, e.description, e.keys.join(",")));
    }
    s
}

/// Range checks of every job plus resource estimates.
pub fn validate(file: &RunFile) -> Result<Vec<(String, Resources)>, CliError> {
    file.check_ids()?;
    file.jobs
        .iter()
        .map(|(id, cfg)| {
            cfg.validate().map_err(|e| CliError::from_job(id, &e))?;
            Ok((id.clone(), cfg.resources()))
        })
        .collect()
}

pub fn job_stream(id: &str) -> u64 {
    hash_str(id)
}

pub fn job_seed(master: u64, id: &str) -> u64 {
    derive(&[master, job_stream(id)])
}

fn env_usize(key: &str) -> Option<usize> {
    std::env::var(key).ok()?.trim().parse().ok()
}

fn env_f64(key: &str) -> Option<f64> {
    std::env::var(key).ok()?.trim().parse().ok()
}

fn write_output(dir: &Path, name: String, bytes: Vec<u8>) -> Result<OutputRecord, CliError> {
    std::fs::write(dir.join(&name), &bytes).map_err(|e| CliError::io(format!("cannot write {name}: {e}")))?;
    Ok(OutputRecord {
        file: name,
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

fn write_report(dir: &Path, id: &str, rep: &StatReport) -> Result<Vec<OutputRecord>, CliError> {
    let err = |e: shelab::Error| CliError::from_job(id, &e);
    let mut out = Vec::new();
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).map_err(err)?;
    out.push(write_output(dir, format!("{id}.csv"), buf)?);
    let mut json = serde_json::to_string_pretty(&rep.summary()).map_err(|e| CliError::io(e.to_string()))?;
    json.push('\n');
    out.push(write_output(dir, format!("{id}.summary.json"), json.into_bytes())?);
    for (name, table) in &rep.tables {
        let mut buf = Vec::new();
        table.write_csv(&mut buf).map_err(err)?;
        out.push(write_output(dir, format!("{id}.{name}.csv"), buf)?);
    }
    Ok(out)
}

fn run_job(dir: &Path, id: &str, cfg: &ExperimentConfig, master: u64, max_bytes: Option<f64>) -> JobRecord {
    let seed = job_seed(master, id);
    let started = now_unix_ms();
    let mut rec = JobRecord {
        id: id.to_string(),
        experiment: cfg.id().to_string(),
        config_hash: shelab::experiments::config_hash(cfg),
        stream_id: job_stream(id),
        seed,
        status: JobStatus::Failed,
        started_unix_ms: started,
        finished_unix_ms: started,
        checks_passed: 0,
        checks_failed: 0,
        outputs: Vec::new(),
        error: None,
    };
    let outcome = match max_bytes {
        Some(cap) if cfg.resources().bytes > cap => Err(CliError::from_job(
            id,
            &shelab::Error::Resource(format!(
                "estimated {:.3e} bytes exceeds {MAX_BYTES_ENV} = {cap:.3e}",
                cfg.resources().bytes
            )),
        )),
        _ => cfg
            .run(seed)
            .map_err(|e| CliError::from_job(id, &e))
            .and_then(|rep| write_report(dir, id, &rep).map(|o| (rep, o))),
    };
    match outcome {
        Ok((rep, outputs)) => {
            rec.status = if rep.blocked.is_empty() {
                JobStatus::Ok
            } else {
                JobStatus::Blocked
            };
            rec.checks_passed = rep.passed();
            rec.checks_failed = rep.failed();
            rec.outputs = outputs;
        }
        Err(e) => {
            rec.error = Some(JobError {
                exit_code: e.code,
                message: e.message,
            });
        }
    }
    rec.finished_unix_ms = now_unix_ms();
    rec
}

/// Execute every job and return the manifest and the process exit code.
///
/// The exit code is that of the first failed job, else 4 when a job was
/// blocked by a resource cap, else 0.
pub fn run(file: &RunFile, opts: &RunOptions) -> Result<(Manifest, i32), CliError> {
    validate(file)?;
    std::fs::create_dir_all(&opts.out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", opts.out.display())))?;
    let config_hash = sha256_hex(file.canonical_json().as_bytes());
    let previous = if opts.resume {
        Manifest::read(&opts.out).filter(|m| m.config_hash == config_hash && m.master_seed == file.seed)
    } else {
        None
    };
    let mut manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        master_seed: file.seed,
        started_unix_ms: now_unix_ms(),
        finished_unix_ms: None,
        jobs: Vec::new(),
    };
    let threads = opts.threads.or_else(|| env_usize(THREADS_ENV));
    let max_bytes = env_f64(MAX_BYTES_ENV);
    for (id, cfg) in &file.jobs {
        let reused = previous
            .as_ref()
            .and_then(|m| m.job(id))
            .filter(|j| j.status != JobStatus::Failed && outputs_intact(&opts.out, j))
            .cloned();
        let rec = match reused {
            Some(r) => r,
            None => shelab::parallel::with_threads(threads, || run_job(&opts.out, id, cfg, file.seed, max_bytes)),
        };
        manifest.jobs.push(rec);
        manifest.write(&opts.out)?;
    }
    manifest.finished_unix_ms = Some(now_unix_ms());
    manifest.write(&opts.out)?;
    let code = manifest
        .jobs
        .iter()
        .find_map(|j| j.error.as_ref().map(|e| e.exit_code))
        .unwrap_or_else(|| {
            if manifest.jobs.iter().any(|j| j.status == JobStatus::Blocked) {
                4
            } else {
                0
            }
        });
    Ok((manifest, code))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_only_on_master_and_id() {
        assert_eq!(job_seed(1, "a"), job_seed(1, "a"));
        assert_ne!(job_seed(1, "a"), job_seed(1, "b"));
        assert_ne!(job_seed(1, "a"), job_seed(2, "a"));
    }

    #[test]
    fn catalog_lists_every_id() {
        let s = list_experiments();
        for id in [
            "onepoint",
            "l2",
            "ew-fluct",
            "llt",
            "decorrelation",
            "fk-vs-spde",
            "limit-sample",
        ] {
            assert!(s.lines().any(|l| l.starts_with(&format!("{id}\t"))), "{id}");
        }
        assert_eq!(s, list_experiments());
    }
}
