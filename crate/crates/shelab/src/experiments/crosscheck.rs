//! Feynman-Kac paths against the lattice equation on shared inputs.
//!
//! Both routes estimate `u(tau / T, x)` for a microscopic horizon `tau`. The
//! path route averages quenched estimates over independent environments. The
//! lattice route averages the ratio `u / u_bar` over lattice nodes (all nodes
//! for flat data, an interior window away from the periodic seam otherwise)
//! and then over independent runs; standard errors come from the run level.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::experiments::report::{Provenance, Row, StatReport};
use crate::experiments::{
    check_beta, check_count, check_delta, check_multiple, check_positive, check_stability, config_hash, default_delta,
    Resources,
};
use crate::mathkernel::{InitialCondition, Mollifier, ScaleParams};
use crate::polymer::{annealed, disorder_variance, w_martingale, Environment};
use crate::rng::derive;
use crate::spde::{integrate_she, IntegratorConfig};
use crate::stats::Welford;
use crate::{Point, Result};

/// One shared configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCase {
    pub beta_hat: f64,
    pub u0: InitialCondition,
    /// Macroscopic evaluation point.
    pub x: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosscheckConfig {
    pub t_micro: f64,
    /// Microscopic horizon `tau`.
    pub horizon: f64,
    pub cases: Vec<CrossCase>,
    pub fk_replicas: usize,
    pub fk_paths: usize,
    pub fk_dt: f64,
    pub fk_dx: f64,
    pub spde_replicas: usize,
    /// Lattice nodes per mollifier width.
    pub spde_per_eps: f64,
    /// Periodic box half-width in units of `sqrt(tau)` beyond the window.
    pub spde_spread: f64,
    /// Lattice time step; `None` takes the largest stable one.
    pub spde_dt: Option<f64>,
    /// Half-width of the averaging window for non-flat data.
    pub spde_window: f64,
    pub delta: f64,
    pub mean_k: f64,
    pub var_tol: f64,
}

fn default_cases() -> Vec<CrossCase> {
    let bump = InitialCondition::GaussianBump {
        base: 1.0,
        amplitude: 0.5,
        center: [0.0, 0.0],
        width: 0.5,
    };
    vec![
        CrossCase {
            beta_hat: 0.0,
            u0: InitialCondition::flat(),
            x: [0.0, 0.0],
        },
        CrossCase {
            beta_hat: 0.5,
            u0: InitialCondition::flat(),
            x: [0.0, 0.0],
        },
        CrossCase {
            beta_hat: 0.3,
            u0: InitialCondition::flat(),
            x: [0.0, 0.0],
        },
        CrossCase {
            beta_hat: 0.5,
            u0: InitialCondition::sine(0.5),
            x: [0.5, 0.0],
        },
        CrossCase {
            beta_hat: 0.3,
            u0: bump,
            x: [0.25, 0.0],
        },
    ]
}

impl Default for CrosscheckConfig {
    fn default() -> Self {
        Self {
            t_micro: 1e4,
            horizon: 16.0,
            cases: default_cases(),
            fk_replicas: 2000,
            fk_paths: 2000,
            fk_dt: 0.1,
            fk_dx: 0.5,
            spde_replicas: 200,
            spde_per_eps: 3.0,
            spde_spread: 4.0,
            spde_dt: None,
            spde_window: 8.0,
            delta: default_delta(),
            mean_k: 3.0,
            var_tol: 0.15,
        }
    }
}

/// Mean and variance of `u` with standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RouteMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
    pub n: u64,
}

impl CrosscheckConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("t_micro", self.t_micro)?;
        check_positive("horizon", self.horizon)?;
        check_positive("fk_dt", self.fk_dt)?;
        check_positive("fk_dx", self.fk_dx)?;
        check_multiple("horizon", self.horizon, self.fk_dt)?;
        if self.cases.is_empty() {
            return Err(crate::Error::config("cases", "at least one case is required"));
        }
        for (i, c) in self.cases.iter().enumerate() {
            check_beta(&format!("cases[{i}].beta_hat"), c.beta_hat)?;
            c.u0.validate()
                .map_err(|e| crate::Error::config(format!("cases[{i}].u0"), e.to_string()))?;
        }
        check_count("fk_replicas", self.fk_replicas, 2)?;
        check_count("fk_paths", self.fk_paths, 2)?;
        check_count("spde_replicas", self.spde_replicas, 2)?;
        if !(self.spde_per_eps >= 2.0) {
            return Err(crate::Error::config(
                "spde_per_eps",
                "the mollifier needs at least two nodes per width",
            ));
        }
        check_positive("spde_window", self.spde_window)?;
        check_stability("spde_dt", self.spde_dt, 1.0 / self.spde_per_eps)?;
        check_delta(self.delta)
    }

    fn lattice(&self, case: &CrossCase) -> IntegratorConfig {
        let mut c = IntegratorConfig::for_horizon(1.0, self.spde_per_eps, self.horizon, self.spde_spread, 2.0);
        if let Some(dt) = self.spde_dt {
            c.dt = dt;
        }
        if !case.u0.is_flat() {
            c.side = 2.0 * (self.spde_window + self.spde_spread * self.horizon.sqrt()) + 2.0;
        }
        let s = self.t_micro.sqrt();
        c.center = [case.x[0] * s, case.x[1] * s];
        c.x_scale = 1.0 / s;
        c.snapshots = vec![self.horizon];
        c
    }

    pub fn resources(&self) -> Resources {
        let env = Environment::new(self.fk_dt, self.fk_dx, Arc::new(Mollifier::bump()));
        let mut secs = 0.0;
        let mut bytes: f64 = 0.0;
        for case in &self.cases {
            let cells = env
                .grid([0.0, 0.0], 0.0, self.horizon)
                .map(|g| g.cells() as f64)
                .unwrap_or(0.0);
            secs +=
                self.fk_replicas as f64 * (self.fk_paths as f64 * self.horizon / self.fk_dt * 3.5e-7 + cells * 3e-8);
            let lat = self.lattice(case);
            secs += self.spde_replicas as f64 * lat.work(self.horizon) * 8e-8;
            let n = lat.nodes_per_axis() as f64;
            bytes = bytes.max(cells * 8.0).max(n * n * 40.0);
        }
        Resources::seconds(bytes, secs)
    }

    /// Path route for one case.
    pub fn fk_moments(&self, case: &CrossCase, seed: u64) -> Result<RouteMoments> {
        let params = ScaleParams::from_horizon(self.t_micro, case.beta_hat, self.delta)?;
        let s = self.t_micro.sqrt();
        let x = [case.x[0] * s, case.x[1] * s];
        let env = Environment::new(self.fk_dt, self.fk_dx, Arc::new(Mollifier::bump()));
        let grid = env.grid(x, 0.0, self.horizon)?;
        let t_macro = self.horizon / self.t_micro;
        let (z, vals) = annealed(&env, grid, self.fk_replicas, seed, |noise, sd| {
            w_martingale(x, self.horizon, t_macro, &params, &case.u0, noise, self.fk_paths, sd)
        })?;
        let (var, var_se) = disorder_variance(&vals);
        Ok(RouteMoments {
            mean: z.mean,
            mean_se: z.stderr,
            var,
            var_se,
            n: z.n_samples,
        })
    }

    /// Lattice route for one case.
    pub fn spde_moments(&self, case: &CrossCase, seed: u64) -> Result<RouteMoments> {
        let params = ScaleParams::from_horizon(self.t_micro, case.beta_hat, self.delta)?;
        let lat = self.lattice(case);
        let t_macro = self.horizon / self.t_micro;
        let scale = lat.x_scale;
        let ubar_x = case.u0.u_bar(t_macro, case.x)?;
        let mut means = Welford::new();
        let mut vars = Welford::new();
        for r in 0..self.spde_replicas as u64 {
            let traj = integrate_she(&case.u0, self.horizon, &params, &lat, seed, r)?;
            let field = traj.last();
            let mut m = Welford::new();
            let mut v = Welford::new();
            for iy in 0..field.ny {
                for ix in 0..field.nx {
                    let p = field.node(ix, iy);
                    if !case.u0.is_flat()
                        && ((p[0] - lat.center[0]).abs() > self.spde_window
                            || (p[1] - lat.center[1]).abs() > self.spde_window)
                    {
                        continue;
                    }
                    let ub = case.u0.u_bar(t_macro, [p[0] * scale, p[1] * scale])?;
                    let ratio = field.at(ix, iy) / ub;
                    m.push(ratio);
                    v.push((ratio - 1.0).powi(2));
                }
            }
            means.push(m.mean());
            vars.push(v.mean());
        }
        Ok(RouteMoments {
            mean: ubar_x * means.mean(),
            mean_se: ubar_x * means.stderr(),
            var: ubar_x * ubar_x * vars.mean(),
            var_se: ubar_x * ubar_x * vars.stderr(),
            n: self.spde_replicas as u64,
        })
    }

    pub fn run(&self, seed: u64) -> Result<StatReport> {
        self.validate()?;
        let mut rep = StatReport::new("fk-vs-spde", config_hash(self), seed);
        rep.notes.push(format!(
            "micro horizon tau = {}; T = {}; path route dt = {}, dx = {}; lattice dx = 1/{}",
            self.horizon, self.t_micro, self.fk_dt, self.fk_dx, self.spde_per_eps
        ));
        let t_macro = self.horizon / self.t_micro;
        for (i, case) in self.cases.iter().enumerate() {
            let ubar = case.u0.u_bar(t_macro, case.x)?;
            let fk = self.fk_moments(case, derive(&[seed, 0xF4, i as u64]))?;
            let sp = self.spde_moments(case, derive(&[seed, 0x5D, i as u64]))?;
            let label = |s: &str| format!("{s}@case{i}");
            for (route, m) in [("fk", &fk), ("spde", &sp)] {
                let ok = (m.mean - ubar).abs() <= self.mean_k * m.mean_se || m.mean == ubar;
                rep.push(
                    Row::new(format!("mean_{route}"), m.mean, m.mean_se, m.n)
                        .at(self.t_micro, case.beta_hat)
                        .param("case", i as f64)
                        .reference(ubar, 0.0, Provenance::Formula)
                        .judged(self.mean_k, ok),
                );
                rep.push(
                    Row::new(format!("var_{route}"), m.var, m.var_se, m.n)
                        .at(self.t_micro, case.beta_hat)
                        .param("case", i as f64),
                );
            }
            let se = (fk.mean_se.powi(2) + sp.mean_se.powi(2)).sqrt();
            let ok_mean = (fk.mean - sp.mean).abs() <= self.mean_k * se;
            rep.check(
                label("means_agree"),
                ok_mean,
                format!(
                    "fk {:.5} +- {:.5}, spde {:.5} +- {:.5}, u_bar {ubar:.5}",
                    fk.mean, fk.mean_se, sp.mean, sp.mean_se
                ),
            );
            let big = fk.var.abs().max(sp.var.abs());
            let var_se = (fk.var_se.powi(2) + sp.var_se.powi(2)).sqrt();
            let ok_var = if case.beta_hat == 0.0 {
                fk.var.abs() <= self.mean_k * var_se.max(1e-300) && sp.var.abs() <= 1e-8
            } else {
                (fk.var - sp.var).abs() <= self.var_tol * big
            };
            rep.push(
                Row::new("var_ratio", fk.var / sp.var, f64::NAN, fk.n)
                    .at(self.t_micro, case.beta_hat)
                    .param("case", i as f64)
                    .reference(1.0, 0.0, Provenance::CrossOracle)
                    .judged(self.var_tol, ok_var),
            );
            rep.check(
                label("variances_agree"),
                ok_var,
                format!(
                    "fk {:.5} +- {:.5}, spde {:.5} +- {:.5}",
                    fk.var, fk.var_se, sp.var, sp.var_se
                ),
            );
        }
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CrosscheckConfig {
        CrosscheckConfig {
            horizon: 2.0,
            fk_replicas: 30,
            fk_paths: 200,
            spde_replicas: 4,
            spde_per_eps: 2.0,
            spde_window: 3.0,
            ..CrosscheckConfig::default()
        }
    }

    #[test]
    fn zero_disorder_both_reproduce_ubar() {
        let c = small();
        let case = CrossCase {
            beta_hat: 0.0,
            u0: InitialCondition::sine(0.5),
            x: [0.5, 0.0],
        };
        let ubar = case.u0.u_bar(c.horizon / c.t_micro, case.x).unwrap();
        let sp = c.spde_moments(&case, 1).unwrap();
        assert!((sp.mean - ubar).abs() < 1e-6, "{} {ubar}", sp.mean);
        assert!(sp.var < 1e-10);
        let fk = c.fk_moments(&case, 2).unwrap();
        assert!((fk.mean - ubar).abs() < 3.0 * fk.mean_se + 1e-12);
    }

    #[test]
    fn flat_means_agree() {
        let c = small();
        let case = CrossCase {
            beta_hat: 0.5,
            u0: InitialCondition::flat(),
            x: [0.0, 0.0],
        };
        let sp = c.spde_moments(&case, 3).unwrap();
        let fk = c.fk_moments(&case, 4).unwrap();
        let se = (sp.mean_se.powi(2) + fk.mean_se.powi(2)).sqrt();
        assert!((sp.mean - fk.mean).abs() < 4.0 * se);
        assert!(sp.var > 0.0 && fk.var > 0.0);
    }
}
