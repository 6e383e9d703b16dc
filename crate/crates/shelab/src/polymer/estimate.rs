use serde::{Deserialize, Serialize};

use std::io::Write;

use crate::stats::Welford;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    /// Path average for one fixed noise realization.
    Quenched,
    /// Average over independent noise realizations.
    Annealed,
    /// Noise-free Brownian functional.
    Replica,
}

/// Monte Carlo estimate with `stderr = sd / sqrt(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub kind: EstimateKind,
}

impl PartitionEstimate {
    pub fn from_welford(w: &Welford, kind: EstimateKind) -> Result<Self> {
        if w.count() < 2 {
            return Err(Error::domain("an estimate needs at least two samples"));
        }
        Ok(Self {
            mean: w.mean(),
            stderr: w.stderr(),
            n_samples: w.count(),
            kind,
        })
    }

    pub fn from_samples(xs: &[f64], kind: EstimateKind) -> Result<Self> {
        Self::from_welford(&xs.iter().copied().collect(), kind)
    }

    /// Mean of `exp(l)` over log-samples, accumulated relative to the
    /// largest one so nothing overflows. `-inf` entries count as zeros.
    pub fn from_log_samples(logs: &[f64], kind: EstimateKind) -> Result<Self> {
        if logs.len() < 2 {
            return Err(Error::domain("an estimate needs at least two samples"));
        }
        if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::numeric("non-finite log weight", f64::NAN));
        }
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Ok(Self {
                mean: 0.0,
                stderr: 0.0,
                n_samples: logs.len() as u64,
                kind,
            });
        }
        let w: Welford = logs.iter().map(|l| (l - m).exp()).collect();
        let scale = m.exp();
        if !scale.is_finite() {
            return Err(Error::numeric("partition estimate overflows", m));
        }
        Ok(Self {
            mean: w.mean() * scale,
            stderr: w.stderr() * scale,
            n_samples: w.count(),
            kind,
        })
    }

    /// `|a - b| <= k * sqrt(se_a^2 + se_b^2)`.
    pub fn agrees_with(&self, other: &Self, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.stderr.hypot(other.stderr)
    }

    /// CSV record `(op, params-hash, mean, stderr, n, seed)`.
    pub fn csv_record(&self, op: &str, params_hash: &str, seed: u64) -> [String; 6] {
        [
            op.to_string(),
            params_hash.to_string(),
            format!("{:.16e}", self.mean),
            format!("{:.16e}", self.stderr),
            self.n_samples.to_string(),
            seed.to_string(),
        ]
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

pub const ESTIMATE_CSV_HEADER: [&str; 6] = ["op", "params_hash", "mean", "stderr", "n", "seed"];

/// One labelled estimate for CSV export.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRecord {
    pub op: String,
    pub params_hash: String,
    pub estimate: PartitionEstimate,
    pub seed: u64,
}

/// Header plus one row per record.
pub fn write_estimates<W: Write>(w: W, records: &[EstimateRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ESTIMATE_CSV_HEADER)?;
    for r in records {
        out.write_record(r.estimate.csv_record(&r.op, &r.params_hash, r.seed))?;
    }
    out.flush()?;
    Ok(())
}

/// Quenched value together with its path-sampling standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchedValue {
    pub value: f64,
    pub stderr: f64,
}

impl From<PartitionEstimate> for QuenchedValue {
    fn from(e: PartitionEstimate) -> Self {
        Self {
            value: e.mean,
            stderr: e.stderr,
        }
    }
}

/// Variance of the quenched values across noise draws, with the mean
/// path-sampling variance removed.
pub fn disorder_variance(values: &[QuenchedValue]) -> (f64, f64) {
    let xs: Vec<f64> = values.iter().map(|q| q.value).collect();
    let (v, se) = crate::stats::variance_with_se(&xs);
    let inner = values.iter().map(|q| q.stderr * q.stderr).sum::<f64>() / values.len() as f64;
    (v - inner, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_samples_match_direct() {
        let xs = [0.5f64, 1.5, 2.0, 0.1];
        let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let a = PartitionEstimate::from_log_samples(&logs, EstimateKind::Quenched).unwrap();
        let b = PartitionEstimate::from_samples(&xs, EstimateKind::Quenched).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-14);
        assert!((a.stderr - b.stderr).abs() < 1e-14);
    }

    #[test]
    fn huge_logs_stay_finite() {
        let logs = [700.0, 701.0, 699.5];
        let e = PartitionEstimate::from_log_samples(&logs, EstimateKind::Quenched).unwrap();
        assert!(e.mean.is_finite() && e.mean > 0.0);
        let logs = [-800.0, -801.0];
        let e = PartitionEstimate::from_log_samples(&logs, EstimateKind::Quenched).unwrap();
        assert!(e.mean >= 0.0 && e.mean.is_finite());
    }

    #[test]
    fn needs_two_samples() {
        assert!(PartitionEstimate::from_samples(&[1.0], EstimateKind::Replica).is_err());
    }

    #[test]
    fn zero_weights() {
        let e = PartitionEstimate::from_log_samples(&[f64::NEG_INFINITY; 3], EstimateKind::Quenched).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn csv_rows_round_trip() {
        let e = PartitionEstimate::from_samples(&[0.1, 0.7, 1.3], EstimateKind::Annealed).unwrap();
        let rec = EstimateRecord {
            op: "partition_function".into(),
            params_hash: "00ff".into(),
            estimate: e,
            seed: 9,
        };
        let mut buf = Vec::new();
        write_estimates(&mut buf, &[rec]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "op,params_hash,mean,stderr,n,seed");
        let f: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(f[0], "partition_function");
        assert_eq!(f[2].parse::<f64>().unwrap(), e.mean);
        assert_eq!(f[3].parse::<f64>().unwrap(), e.stderr);
        assert_eq!(f[4], "3");
        assert_eq!(f[5], "9");
    }
}
