//! One-point law of `u` by the Feynman-Kac route.
//!
//! Each noise replica yields a quenched estimate of `u(t, 0) = Z_tau(0)` for
//! flat data, `tau` the microscopic horizon. The disorder variance is the
//! spread of the quenched values minus their mean squared path error. The
//! law of `log u` is compared to `N(-s^2/2, s^2)` with `s^2 = log E[Z^2]`
//! taken from the replica oracle at the same `T` and `tau`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::experiments::report::{Provenance, Row, StatReport, Table};
use crate::experiments::{
    check_beta, check_count, check_delta, check_ladder, check_multiple, check_positive, config_hash, default_delta,
    Resources, MIN_DISTRIBUTION_REPLICAS,
};
use crate::mathkernel::{sigma2, Mollifier, ScaleParams};
use crate::polymer::{
    annealed, disorder_variance, partition_function, replica_second_moment, Environment, ReplicaOpts,
};
use crate::rng::derive;
use crate::stats::{ks_normal, moments3, trend, Direction};
use crate::{Point, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnepointConfig {
    pub beta_hat: f64,
    pub t_values: Vec<f64>,
    /// Microscopic horizon of the polymer.
    pub horizon: f64,
    pub x: Point,
    pub replicas: usize,
    pub paths: usize,
    pub oracle_pairs: usize,
    pub dt: f64,
    pub dx: f64,
    pub delta: f64,
    pub var_tol: f64,
    pub ks_max: f64,
}

impl Default for OnepointConfig {
    fn default() -> Self {
        Self {
            beta_hat: 0.5,
            t_values: vec![1e4],
            horizon: 16.0,
            x: [0.0, 0.0],
            replicas: 2000,
            paths: 4000,
            oracle_pairs: 100_000,
            dt: 0.1,
            dx: 0.5,
            delta: default_delta(),
            var_tol: 0.15,
            ks_max: 0.08,
        }
    }
}

impl OnepointConfig {
    pub fn validate(&self) -> Result<()> {
        check_beta("beta_hat", self.beta_hat)?;
        check_ladder("t_values", &self.t_values, 2.0)?;
        check_positive("horizon", self.horizon)?;
        check_positive("dt", self.dt)?;
        check_positive("dx", self.dx)?;
        check_multiple("horizon", self.horizon, self.dt)?;
        check_count("replicas", self.replicas, MIN_DISTRIBUTION_REPLICAS)?;
        check_count("paths", self.paths, 2)?;
        check_count("oracle_pairs", self.oracle_pairs, 2)?;
        check_delta(self.delta)
    }

    fn environment(&self) -> Environment {
        Environment::new(self.dt, self.dx, Arc::new(Mollifier::bump()))
    }

    pub fn resources(&self) -> Resources {
        let env = self.environment();
        let cells = env
            .grid(self.x, 0.0, self.horizon)
            .map(|g| g.cells() as f64)
            .unwrap_or(f64::INFINITY);
        let steps = self.horizon / self.dt;
        let per_t = self.replicas as f64 * (self.paths as f64 * steps * 3.5e-7 + cells * 3e-8)
            + self.oracle_pairs as f64 * 1e-4;
        Resources::seconds(cells * 8.0, per_t * self.t_values.len() as f64)
    }

    pub fn run(&self, seed: u64) -> Result<StatReport> {
        self.validate()?;
        let mut rep = StatReport::new("onepoint", config_hash(self), seed);
        rep.notes.push(format!(
            "flat data; micro horizon tau = {}; dt = {}, dx = {}; variance is the quenched-corrected disorder variance",
            self.horizon, self.dt, self.dx
        ));
        let env = self.environment();
        let grid = env.grid(self.x, 0.0, self.horizon)?;
        let mut samples = Table::new(&["t_micro", "replica", "u", "u_stderr", "log_u"]);
        let mut s2_ladder = Vec::new();
        for (k, &t) in self.t_values.iter().enumerate() {
            let params = ScaleParams::from_horizon(t, self.beta_hat, self.delta)?;
            let (z, vals) = annealed(&env, grid, self.replicas, derive(&[seed, k as u64]), |noise, s| {
                partition_function(self.x, self.horizon, &params, noise, self.paths, s)
            })?;
            let (var, var_se) = disorder_variance(&vals);
            let opts = ReplicaOpts::new(&env.mollifier, derive(&[seed, 0x0AC1E, k as u64]));
            let oracle = replica_second_moment(
                self.x,
                self.x,
                self.beta_hat,
                self.beta_hat,
                self.horizon,
                &params,
                &opts,
                self.oracle_pairs,
            )?;
            let ref_var = oracle.mean - 1.0;
            let s2 = oracle.mean.ln();
            s2_ladder.push((s2, oracle.stderr / oracle.mean));

            let ok_mean = (z.mean - 1.0).abs() <= 3.0 * z.stderr || z.stderr == 0.0 && z.mean == 1.0;
            rep.push(
                Row::new("mean_u", z.mean, z.stderr, z.n_samples)
                    .at(t, self.beta_hat)
                    .reference(1.0, 0.0, Provenance::Trivial)
                    .judged(3.0, ok_mean),
            );
            rep.check(
                format!("mean@T={t:e}"),
                ok_mean,
                format!("{:.5} +- {:.5}", z.mean, z.stderr),
            );

            let ok_var = (var - ref_var).abs() <= self.var_tol * ref_var.abs() || var == 0.0 && ref_var == 0.0;
            rep.push(
                Row::new("var_u", var, var_se, z.n_samples)
                    .at(t, self.beta_hat)
                    .param("horizon", self.horizon)
                    .reference(ref_var, oracle.stderr, Provenance::ReplicaOracle)
                    .judged(self.var_tol, ok_var),
            );
            rep.check(
                format!("variance@T={t:e}"),
                ok_var,
                format!("{var:.5} +- {var_se:.5} vs oracle {ref_var:.5} +- {:.5}", oracle.stderr),
            );

            let logs: Vec<f64> = vals.iter().map(|q| q.value.ln()).collect();
            let ks = ks_normal(&logs, -0.5 * s2, s2.max(0.0).sqrt());
            let ok_ks = ks < self.ks_max;
            rep.push(
                Row::new("ks_log_u", ks, f64::NAN, logs.len() as u64)
                    .at(t, self.beta_hat)
                    .param("sigma2_hat", s2)
                    .reference(0.0, 0.0, Provenance::ReplicaOracle)
                    .judged(self.ks_max, ok_ks),
            );
            rep.check(format!("ks@T={t:e}"), ok_ks, format!("KS = {ks:.4}, s^2 = {s2:.5}"));

            let (m, v, skew) = moments3(&logs);
            let n = logs.len() as u64;
            rep.push(
                Row::new("mean_log_u", m, (v / n as f64).sqrt(), n)
                    .at(t, self.beta_hat)
                    .reference(-0.5 * s2, 0.5 * oracle.stderr / oracle.mean, Provenance::ReplicaOracle),
            );
            rep.push(
                Row::new("var_log_u", v, v * (2.0 / n as f64).sqrt(), n)
                    .at(t, self.beta_hat)
                    .reference(s2, oracle.stderr / oracle.mean, Provenance::ReplicaOracle),
            );
            rep.push(
                Row::new("skew_log_u", skew, (6.0 / n as f64).sqrt(), n)
                    .at(t, self.beta_hat)
                    .reference(0.0, 0.0, Provenance::Formula),
            );
            rep.push(
                Row::new("sigma2_finite_t", s2, oracle.stderr / oracle.mean, oracle.n_samples)
                    .at(t, self.beta_hat)
                    .reference(sigma2(self.beta_hat), 0.0, Provenance::Formula),
            );
            for (i, (q, l)) in vals.iter().zip(&logs).enumerate() {
                samples.push_floats(&[t, i as f64, q.value, q.stderr, *l]);
            }
        }
        if s2_ladder.len() > 1 {
            rep.trends
                .push(("sigma2_finite_t".into(), trend(&s2_ladder, Direction::Increasing, 2.0)));
        }
        rep.tables.push(("samples".into(), samples));
        Ok(rep)
    }
}
