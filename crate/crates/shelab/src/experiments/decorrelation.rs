//! Spatial decorrelation of the partition function.

use serde::{Deserialize, Serialize};

use crate::experiments::report::{Provenance, Row, StatReport};
use crate::experiments::{check_beta, check_count, check_delta, check_positive, config_hash, default_delta, Resources};
use crate::mathkernel::{Mollifier, ScaleParams};
use crate::polymer::{decorrelation, second_moment_at, ReplicaOpts};
use crate::rng::derive;
use crate::stats::linear_fit;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecorrelationConfig {
    pub beta_hat: f64,
    /// `T` of the disorder scaling.
    pub t_micro: f64,
    pub ell: f64,
    /// Near-regime distances, `|x| <= sqrt(log ell)`.
    pub near: Vec<f64>,
    /// Far-regime distances.
    pub far: Vec<f64>,
    pub pairs: usize,
    pub delta: f64,
    pub exponent: f64,
    pub exponent_tol: f64,
    pub slack: f64,
}

impl Default for DecorrelationConfig {
    fn default() -> Self {
        Self {
            beta_hat: 0.5,
            t_micro: 1e4,
            ell: 1e3,
            near: vec![0.1, 0.2, 0.4, 0.8],
            far: vec![100.0, 200.0],
            pairs: 20_000,
            delta: default_delta(),
            exponent: 2.0,
            exponent_tol: 0.5,
            slack: 2.0,
        }
    }
}

impl DecorrelationConfig {
    pub fn validate(&self) -> Result<()> {
        check_beta("beta_hat", self.beta_hat)?;
        check_positive("t_micro", self.t_micro)?;
        if !(self.ell >= 1.0 && self.ell <= self.t_micro) {
            return Err(Error::config(
                "ell",
                format!("must satisfy 1 <= ell <= T, got {}", self.ell),
            ));
        }
        let edge = self.ell.ln().sqrt();
        if self.near.iter().any(|&x| !(x > 0.0 && x <= edge)) {
            return Err(Error::config(
                "near",
                format!("distances must lie in (0, sqrt(log ell)] = (0, {edge:.3}]"),
            ));
        }
        if self.far.iter().any(|&x| !(x > edge)) {
            return Err(Error::config(
                "far",
                format!("distances must exceed sqrt(log ell) = {edge:.3}"),
            ));
        }
        check_count("pairs", self.pairs, 2)?;
        check_delta(self.delta)
    }

    pub fn resources(&self) -> Resources {
        let n = (self.near.len() + self.far.len() + 2) as f64;
        Resources::seconds(
            self.pairs as f64 * 8.0,
            n * self.pairs as f64 * 1.5e-4 * self.ell.log10().max(1.0),
        )
    }

    pub fn run(&self, seed: u64) -> Result<StatReport> {
        self.validate()?;
        let mut rep = StatReport::new("decorrelation", config_hash(self), seed);
        let m = Mollifier::bump();
        let params = ScaleParams::from_horizon(self.t_micro, self.beta_hat, self.delta)?;
        let beta = params.beta_eps;
        let opts = |tag: u64| ReplicaOpts::new(&m, derive(&[seed, tag]));

        let zero = decorrelation(self.ell, [0.0, 0.0], beta, &opts(0), self.pairs)?;
        let ok = zero.mean == 0.0;
        rep.push(
            Row::new("decorrelation", zero.mean, zero.stderr, zero.n_samples)
                .at(self.t_micro, self.beta_hat)
                .param("x", 0.0)
                .reference(0.0, 0.0, Provenance::Trivial)
                .judged(0.0, ok),
        );
        rep.check("origin_exactly_zero", ok, format!("{}", zero.mean));

        let z2 = second_moment_at(beta * beta, [0.0, 0.0], self.ell, &opts(1), self.pairs)?;
        let sat = 2.0 * (z2.mean - 1.0);
        let sat_se = 2.0 * z2.stderr;
        rep.push(
            Row::new("second_moment", z2.mean, z2.stderr, z2.n_samples)
                .at(self.t_micro, self.beta_hat)
                .param("ell", self.ell),
        );

        let mut lx = Vec::new();
        let mut ly = Vec::new();
        let mut c_fit: f64 = 0.0;
        for (k, &x) in self.near.iter().enumerate() {
            let e = decorrelation(self.ell, [x, 0.0], beta, &opts(10 + k as u64), self.pairs)?;
            rep.push(
                Row::new("decorrelation", e.mean, e.stderr, e.n_samples)
                    .at(self.t_micro, self.beta_hat)
                    .param("x", x),
            );
            if e.mean > 0.0 {
                lx.push(x.ln());
                ly.push(e.mean.ln());
            }
            c_fit = c_fit.max(e.mean / (beta * beta * (1.0 + x * x)));
        }
        rep.push(
            Row::new("near_constant", c_fit, f64::NAN, self.pairs as u64)
                .at(self.t_micro, self.beta_hat)
                .param("fit", 0.0),
        );
        if lx.len() >= 2 {
            let fit = linear_fit(&lx, &ly);
            let ok = (fit.slope - self.exponent).abs() <= self.exponent_tol;
            rep.push(
                Row::new("near_exponent", fit.slope, fit.slope_se, lx.len() as u64)
                    .at(self.t_micro, self.beta_hat)
                    .reference(self.exponent, 0.0, Provenance::Formula)
                    .judged(self.exponent_tol, ok),
            );
            rep.check(
                "near_exponent",
                ok,
                format!("slope {:.3} +- {:.3}", fit.slope, fit.slope_se),
            );
        }
        for (k, &x) in self.far.iter().enumerate() {
            let e = decorrelation(self.ell, [x, 0.0], beta, &opts(100 + k as u64), self.pairs)?;
            let ok = e.mean <= sat + self.slack * (e.stderr.powi(2) + sat_se.powi(2)).sqrt();
            rep.push(
                Row::new("decorrelation", e.mean, e.stderr, e.n_samples)
                    .at(self.t_micro, self.beta_hat)
                    .param("x", x)
                    .reference(sat, sat_se, Provenance::ReplicaOracle)
                    .judged(self.slack, ok),
            );
            rep.check(
                format!("far_saturation@x={x}"),
                ok,
                format!("{:.5} vs {sat:.5}", e.mean),
            );
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run() {
        let c = DecorrelationConfig {
            ell: 50.0,
            near: vec![0.1, 0.2, 0.4],
            far: vec![30.0],
            pairs: 4000,
            ..DecorrelationConfig::default()
        };
        let r = c.run(2).unwrap();
        assert!(r.find_check("origin_exactly_zero").unwrap().passed);
        assert!(r.find_check("near_exponent").unwrap().passed, "{:?}", r.checks);
    }

    #[test]
    fn near_regime_edge_is_enforced() {
        let c = DecorrelationConfig {
            near: vec![5.0],
            ..DecorrelationConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
