//! Exact samplers of the limit statistics.
//!
//! The field sampler draws the stochastic convolution on a space-time grid
//! from a correlated noise family, so its covariance carries the joint
//! prefactor `1 / (1 - beta_hat gamma_hat)` through the family rather than
//! through the kernel formula. The kernel sampler draws directly from the
//! quadrature kernel.

use serde::{Deserialize, Serialize};

use crate::experiments::report::{Provenance, Row, StatReport, Table};
use crate::experiments::{check_beta, check_count, check_positive, config_hash, ObservableConfig, Resources};
use crate::limitfield::{sample_limit_statistics, sample_v_field, CovKernel, FieldGrid, ObservableSpec};
use crate::mathkernel::TransformSpec;
use crate::rng::derive;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitSampleConfig {
    pub beta_hat: f64,
    pub gamma_hat: f64,
    pub t: f64,
    pub n: usize,
    pub dt: f64,
    pub dx: f64,
    pub kernel_draws: usize,
    pub rel_tol: f64,
}

impl Default for LimitSampleConfig {
    fn default() -> Self {
        Self {
            beta_hat: 0.5,
            gamma_hat: 0.3,
            t: 1.0,
            n: 10_000,
            dt: 0.1,
            dx: 0.5,
            kernel_draws: 100_000,
            rel_tol: 0.05,
        }
    }
}

impl LimitSampleConfig {
    pub fn validate(&self) -> Result<()> {
        check_beta("beta_hat", self.beta_hat)?;
        check_beta("gamma_hat", self.gamma_hat)?;
        check_positive("t", self.t)?;
        check_positive("dt", self.dt)?;
        check_positive("dx", self.dx)?;
        check_positive("rel_tol", self.rel_tol)?;
        check_count("n", self.n, 2)?;
        check_count("kernel_draws", self.kernel_draws, 2)?;
        crate::experiments::check_multiple("t", self.t, self.dt)?;
        if self.beta_hat * self.gamma_hat == 0.0 {
            return Err(Error::config(
                "gamma_hat",
                "the prefactor test needs beta_hat gamma_hat > 0",
            ));
        }
        Ok(())
    }

    fn observable(&self, beta_hat: f64, transform: TransformSpec) -> Result<ObservableSpec> {
        ObservableConfig {
            t: self.t,
            transform,
            ..ObservableConfig::standard(beta_hat)
        }
        .to_spec()
    }

    fn grid(&self) -> FieldGrid {
        FieldGrid {
            dt: self.dt,
            dx: self.dx,
            ..FieldGrid::default()
        }
    }

    pub fn resources(&self) -> Resources {
        let cells = {
            let h = 8.0 * (1.0 + self.t).sqrt();
            let side = (2.0 * h / self.dx).ceil();
            side * side * (self.t / self.dt).ceil()
        };
        let secs = self.n as f64 * cells * 2e-7 + self.kernel_draws as f64 * 1e-6;
        Resources::seconds(cells * 8.0 * 4.0, secs)
    }

    pub fn run(&self, seed: u64) -> Result<StatReport> {
        self.validate()?;
        let mut rep = StatReport::new("limit-sample", config_hash(self), seed);
        rep.notes.push(format!(
            "field grid dt = {}, dx = {}; flat data, identity F",
            self.dt, self.dx
        ));
        let a = self.observable(self.beta_hat, TransformSpec::Identity)?;
        let b = self.observable(self.gamma_hat, TransformSpec::Identity)?;
        let kernel = CovKernel::build(&[a.clone(), b.clone()])?;
        let pref = 1.0 / (1.0 - self.beta_hat * self.gamma_hat);
        let bare = kernel.get(0, 1) / pref;

        let field = sample_v_field(&[a.clone(), b], &self.grid(), derive(&[seed, 1]), self.n)?;
        let cov = field.covariance();
        let se = field.covariance_stderr();
        let nf = field.len() as u64;

        let var = cov[(0, 0)];
        let target = kernel.get(0, 0);
        let ok = (var - target).abs() <= self.rel_tol * target;
        rep.push(
            Row::new("field_variance", var, se[(0, 0)], nf)
                .at(f64::NAN, self.beta_hat)
                .param("t", self.t)
                .reference(target, kernel.errors[0], Provenance::Quadrature)
                .judged(self.rel_tol, ok),
        );
        rep.check(
            "field_variance",
            ok,
            format!("{var:.6} +- {:.6}, kernel {target:.6}", se[(0, 0)]),
        );

        let est = cov[(0, 1)] / bare;
        let ok = (est - pref).abs() <= self.rel_tol * pref;
        rep.push(
            Row::new("joint_prefactor", est, se[(0, 1)] / bare, nf)
                .at(f64::NAN, self.beta_hat)
                .param("gamma_hat", self.gamma_hat)
                .reference(pref, 0.0, Provenance::Formula)
                .judged(self.rel_tol, ok),
        );
        rep.check(
            "joint_prefactor",
            ok,
            format!("{est:.5} +- {:.5}, exact {pref:.5}", se[(0, 1)] / bare),
        );

        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((cov[(i, j)] / kernel.get(i, j) - 1.0).abs());
            }
        }
        rep.check(
            "field_covariance_matrix",
            worst < self.rel_tol,
            format!("largest relative entry error {worst:.4}"),
        );

        let mut hist = Table::new(&["sample"]);
        for v in field.column(0) {
            hist.push_floats(&[v]);
        }
        rep.tables.push(("field_samples".into(), hist));

        let log = self.observable(self.beta_hat, TransformSpec::Log)?;
        let pair = CovKernel::build(&[a, log])?;
        let draws = sample_limit_statistics(&pair, derive(&[seed, 2]), self.kernel_draws)?;
        let emp = draws.covariance();
        let dse = draws.covariance_stderr();
        let mut all = true;
        for i in 0..2 {
            for j in i..2 {
                let k = pair.get(i, j);
                let ok = (emp[(i, j)] - k).abs() <= self.rel_tol * (pair.get(i, i) * pair.get(j, j)).sqrt();
                all &= ok;
                rep.push(
                    Row::new(
                        "kernel_sampler_covariance",
                        emp[(i, j)],
                        dse[(i, j)],
                        draws.len() as u64,
                    )
                    .at(f64::NAN, self.beta_hat)
                    .param("pair", (2 * i + j) as f64)
                    .reference(k, pair.errors[2 * i + j], Provenance::Quadrature)
                    .judged(self.rel_tol, ok),
                );
            }
        }
        let r = emp[(0, 1)] / (emp[(0, 0)] * emp[(1, 1)]).sqrt();
        rep.push(
            Row::new("kernel_sampler_correlation", r, f64::NAN, draws.len() as u64)
                .at(f64::NAN, self.beta_hat)
                .reference(pair.correlation(0, 1), 0.0, Provenance::Quadrature),
        );
        rep.check(
            "kernel_sampler",
            all,
            format!("correlation {r:.6}, kernel {:.6}", pair.correlation(0, 1)),
        );
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_reports_all_checks() {
        let c = LimitSampleConfig {
            n: 200,
            kernel_draws: 2000,
            rel_tol: 0.5,
            ..LimitSampleConfig::default()
        };
        let rep = c.run(3).unwrap();
        for name in [
            "field_variance",
            "joint_prefactor",
            "field_covariance_matrix",
            "kernel_sampler",
        ] {
            assert!(rep.find_check(name).unwrap().passed, "{name}");
        }
    }

    #[test]
    fn zero_product_rejected() {
        let c = LimitSampleConfig {
            gamma_hat: 0.0,
            ..LimitSampleConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
    }
}
