//! Report rows, checks and their CSV / JSON serialisation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::stats::TrendVerdict;
use crate::Result;

/// Where a reference value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Closed-form evaluation.
    Formula,
    /// Deterministic quadrature.
    Quadrature,
    /// Noise-free replica Monte Carlo.
    ReplicaOracle,
    /// Another simulation route (no external truth).
    CrossOracle,
    /// Exact by construction.
    Trivial,
    /// No reference.
    None,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Formula => "formula",
            Provenance::Quadrature => "quadrature",
            Provenance::ReplicaOracle => "replica_oracle",
            Provenance::CrossOracle => "cross_oracle",
            Provenance::Trivial => "trivial",
            Provenance::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported without a pass/fail claim.
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
        }
    }
}

/// One line of the long-format CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub quantity: String,
    /// Microscopic horizon `T` (NaN when not applicable).
    pub t_micro: f64,
    pub beta_hat: f64,
    pub param: String,
    pub param_value: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub n: u64,
    pub reference: f64,
    pub reference_stderr: f64,
    pub provenance: Provenance,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl Row {
    pub fn new(quantity: impl Into<String>, estimate: f64, stderr: f64, n: u64) -> Self {
        Self {
            quantity: quantity.into(),
            t_micro: f64::NAN,
            beta_hat: f64::NAN,
            param: String::new(),
            param_value: f64::NAN,
            estimate,
            stderr,
            n,
            reference: f64::NAN,
            reference_stderr: f64::NAN,
            provenance: Provenance::None,
            tolerance: f64::NAN,
            verdict: Verdict::Info,
        }
    }

    pub fn at(mut self, t_micro: f64, beta_hat: f64) -> Self {
        self.t_micro = t_micro;
        self.beta_hat = beta_hat;
        self
    }

    pub fn param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.param = name.into();
        self.param_value = value;
        self
    }

    pub fn reference(mut self, value: f64, stderr: f64, provenance: Provenance) -> Self {
        self.reference = value;
        self.reference_stderr = stderr;
        self.provenance = provenance;
        self
    }

    pub fn judged(mut self, tolerance: f64, ok: bool) -> Self {
        self.tolerance = tolerance;
        self.verdict = Verdict::from_bool(ok);
        self
    }
}

/// Named pass/fail claim of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Auxiliary table written next to the main CSV.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| fmt_float(v)).collect());
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Float with 17 significant digits (round-trip exact).
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

/// Full result of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    /// Free-text header lines (tolerance policy, units).
    pub notes: Vec<String>,
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
    pub trends: Vec<(String, TrendVerdict)>,
    pub tables: Vec<(String, Table)>,
    /// Sub-measurements that could not run within the resource caps.
    pub blocked: Vec<String>,
}

pub const TOLERANCE_NOTE: &str =
    "convergence is logarithmic in T; tolerances are generous and every pass/fail is paired with a trend verdict";

pub const CSV_COLUMNS: [&str; 16] = [
    "config_hash",
    "experiment",
    "quantity",
    "t_micro",
    "beta_hat",
    "param",
    "param_value",
    "estimate",
    "stderr",
    "n",
    "reference",
    "reference_stderr",
    "provenance",
    "tolerance",
    "verdict",
    "seed",
];

impl StatReport {
    pub fn new(experiment: &str, config_hash: String, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            config_hash,
            seed,
            notes: vec![TOLERANCE_NOTE.into()],
            rows: Vec::new(),
            checks: Vec::new(),
            trends: Vec::new(),
            tables: Vec::new(),
            blocked: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> bool {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
        passed
    }

    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Long-format CSV preceded by `#` note lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for n in &self.notes {
            writeln!(w, "# {n}")?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            out.write_record([
                self.config_hash.clone(),
                self.experiment.clone(),
                r.quantity.clone(),
                fmt_float(r.t_micro),
                fmt_float(r.beta_hat),
                r.param.clone(),
                fmt_float(r.param_value),
                fmt_float(r.estimate),
                fmt_float(r.stderr),
                r.n.to_string(),
                fmt_float(r.reference),
                fmt_float(r.reference_stderr),
                r.provenance.as_str().to_string(),
                fmt_float(r.tolerance),
                r.verdict.as_str().to_string(),
                self.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// JSON summary with pass/fail counts.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "passed": self.passed(),
            "failed": self.failed(),
            "checks": self.checks,
            "trends": self.trends.iter().map(|(n, t)| serde_json::json!({"name": n, "trend": t})).collect::<Vec<_>>(),
            "blocked": self.blocked,
            "notes": self.notes,
        })
    }
}
