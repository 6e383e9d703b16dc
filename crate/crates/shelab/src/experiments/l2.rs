//! Second moment of the partition function along a `T` ladder.

use serde::{Deserialize, Serialize};

use crate::experiments::report::{Provenance, Row, StatReport};
use crate::experiments::{
    check_beta, check_count, check_delta, check_ladder, check_positive, config_hash, default_delta, Resources,
};
use crate::mathkernel::{Mollifier, ScaleParams};
use crate::polymer::{replica_second_moment, ReplicaOpts};
use crate::rng::derive;
use crate::stats::{trend, Direction};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L2Config {
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub t_values: Vec<f64>,
    /// Macroscopic time; the replica horizon is `t_macro T`.
    pub t_macro: f64,
    pub pairs: usize,
    pub delta: f64,
    /// Relative tolerance of the last ladder value against the limit.
    pub rel_tol: f64,
    /// Trend slack in combined standard errors.
    pub slack: f64,
}

impl Default for L2Config {
    fn default() -> Self {
        Self {
            beta_hat: 0.5,
            gamma_hat: 0.5,
            t_values: vec![1e3, 1e4, 1e5, 1e6],
            t_macro: 1.0,
            pairs: 100_000,
            delta: default_delta(),
            rel_tol: 0.10,
            slack: 2.0,
        }
    }
}

impl L2Config {
    pub fn validate(&self) -> Result<()> {
        check_beta("beta_hat", self.beta_hat)?;
        check_beta("gamma_hat", self.gamma_hat)?;
        check_ladder("t_values", &self.t_values, 2.0)?;
        check_positive("t_macro", self.t_macro)?;
        check_count("pairs", self.pairs, 2)?;
        check_delta(self.delta)?;
        check_positive("rel_tol", self.rel_tol)
    }

    pub fn resources(&self) -> Resources {
        let secs: f64 = self
            .t_values
            .iter()
            .map(|t| self.pairs as f64 * 1e-4 * (t * self.t_macro).log10().max(1.0))
            .sum();
        Resources::seconds(self.pairs as f64 * 8.0, secs)
    }

    /// `1 / (1 - beta_hat gamma_hat)`.
    pub fn limit(&self) -> f64 {
        1.0 / (1.0 - self.beta_hat * self.gamma_hat)
    }

    pub fn run(&self, seed: u64) -> Result<StatReport> {
        self.validate()?;
        let mut rep = StatReport::new("l2", config_hash(self), seed);
        rep.notes
            .push(format!("replica horizon t_macro * T with t_macro = {}", self.t_macro));
        let m = Mollifier::bump();
        let limit = self.limit();
        let mut ladder = Vec::new();
        for (k, &t) in self.t_values.iter().enumerate() {
            let params = ScaleParams::from_horizon(t, self.beta_hat.max(self.gamma_hat), self.delta)?;
            let opts = ReplicaOpts::new(&m, derive(&[seed, k as u64]));
            let e = replica_second_moment(
                [0.0, 0.0],
                [0.0, 0.0],
                self.beta_hat,
                self.gamma_hat,
                self.t_macro * t,
                &params,
                &opts,
                self.pairs,
            )?;
            if self.beta_hat * self.gamma_hat == 0.0 && e.mean != 1.0 {
                return Err(Error::numeric("decoupled second moment must be exactly one", e.mean));
            }
            ladder.push((e.mean, e.stderr));
            let last = k + 1 == self.t_values.len();
            let mut row = Row::new("second_moment", e.mean, e.stderr, e.n_samples)
                .at(t, self.beta_hat)
                .param("gamma_hat", self.gamma_hat)
                .reference(limit, 0.0, Provenance::Formula);
            if last {
                let ok = (e.mean - limit).abs() <= self.rel_tol * limit;
                row = row.judged(self.rel_tol, ok);
                rep.check(
                    "final_within_tolerance",
                    ok,
                    format!("T = {t:e}: {:.5} +- {:.5} vs {limit:.5}", e.mean, e.stderr),
                );
            }
            rep.push(row);
        }
        if ladder.len() > 1 {
            let tr = trend(&ladder, Direction::Increasing, self.slack);
            rep.check(
                "increasing_trend",
                tr.monotone,
                format!("spearman {:.3}; ladder {:?}", tr.spearman, ladder),
            );
            rep.trends.push(("second_moment".into(), tr));
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_is_exactly_one() {
        let c = L2Config {
            gamma_hat: 0.0,
            pairs: 10,
            t_values: vec![1e2, 1e3],
            ..L2Config::default()
        };
        let r = c.run(1).unwrap();
        assert!(r.rows.iter().all(|row| row.estimate == 1.0 && row.stderr == 0.0));
    }

    #[test]
    fn limits() {
        assert!((L2Config::default().limit() - 4.0 / 3.0).abs() < 1e-15);
        let c = L2Config {
            beta_hat: 0.7,
            gamma_hat: 0.3,
            ..L2Config::default()
        };
        assert!((c.limit() - 1.265_822_784_810_126_6).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_keys() {
        let c = L2Config {
            beta_hat: 1.2,
            ..L2Config::default()
        };
        match c.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "beta_hat"),
            other => panic!("{other:?}"),
        }
    }
}
