//! Explicit Euler-Maruyama for `du = 1/2 Lap u dt + beta u xi_eps dt`.
//!
//! The noise is applied at the left end point of every step (Ito), so no
//! renormalisation constant enters the lattice scheme: the mean of `u`
//! solves the heat equation exactly in the scheme's own discretisation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mathkernel::{InitialCondition, Mollifier, ScaleParams};
use crate::noise::{NoiseSource, SpaceTimeGrid, Stencil};
use crate::spde::lattice::LatticeField;
use crate::{Error, Point, Result};

/// Largest admissible `dt / dx^2`.
pub const STABILITY_RATIO: f64 = 0.2;
/// Default cap on `nodes x steps`.
pub const DEFAULT_WORK_BUDGET: f64 = 2e11;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Largest time step; the step actually used divides the horizon.
    pub dt: f64,
    pub dx: f64,
    /// Side of the periodic square.
    pub side: f64,
    pub center: Point,
    /// Mollifier width in lattice units.
    pub eps: f64,
    /// Lattice coordinates are multiplied by this before evaluating `u0`.
    pub x_scale: f64,
    /// Times at which snapshots are recorded (rounded to the step grid).
    pub snapshots: Vec<f64>,
    pub work_budget: f64,
    #[serde(skip, default = "default_mollifier")]
    pub mollifier: Arc<Mollifier>,
}

fn default_mollifier() -> Arc<Mollifier> {
    Arc::new(Mollifier::bump())
}

impl IntegratorConfig {
    /// Macroscopic lattice with `dx = eps / per_eps`, the largest stable
    /// step and a box of side `2 (spread sqrt(t)) + extra`.
    pub fn for_horizon(eps: f64, per_eps: f64, t: f64, spread: f64, extra: f64) -> Self {
        let dx = eps / per_eps;
        Self {
            dt: STABILITY_RATIO * dx * dx,
            dx,
            side: 2.0 * spread * t.sqrt() + extra,
            center: [0.0, 0.0],
            eps,
            x_scale: 1.0,
            snapshots: vec![t],
            work_budget: DEFAULT_WORK_BUDGET,
            mollifier: default_mollifier(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dx > 0.0 && self.side > 0.0 && self.eps > 0.0) {
            return Err(Error::config("spde", "dt, dx, side and eps must be positive"));
        }
        let ratio = self.dt / (self.dx * self.dx);
        if ratio > STABILITY_RATIO * (1.0 + 1e-12) {
            return Err(Error::config(
                "spde.dt",
                format!("dt/dx^2 = {ratio} exceeds the stability bound {STABILITY_RATIO}"),
            ));
        }
        if self.eps < 2.0 * self.dx * (1.0 - 1e-12) {
            return Err(Error::Resolution(format!(
                "eps = {} must be at least 2 dx = {}",
                self.eps,
                2.0 * self.dx
            )));
        }
        Ok(())
    }

    pub fn nodes_per_axis(&self) -> usize {
        (self.side / self.dx).round().max(1.0) as usize
    }

    /// Steps used for horizon `t`.
    pub fn steps_for(&self, t: f64) -> usize {
        ((t / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    /// `nodes x steps` for horizon `t`.
    pub fn work(&self, t: f64) -> f64 {
        let n = self.nodes_per_axis() as f64;
        n * n * self.steps_for(t) as f64
    }
}

/// Snapshots in time order.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<LatticeField>,
}

impl Trajectory {
    pub fn last(&self) -> &LatticeField {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
}

/// Integrate the regularised equation from `u0` up to `t`.
///
/// Replicas are distinguished by `stream`; the noise of a run is a pure
/// function of `(seed, stream)`.
pub fn integrate_she(
    u0: &InitialCondition,
    t: f64,
    params: &ScaleParams,
    config: &IntegratorConfig,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    config.validate()?;
    u0.validate()?;
    if !(t > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {t}")));
    }
    let work = config.work(t);
    if work > config.work_budget {
        return Err(Error::Resource(format!(
            "lattice run needs {work:.3e} node-steps, budget is {:.3e}",
            config.work_budget
        )));
    }
    let steps = config.steps_for(t);
    let dt = t / steps as f64;
    let n = config.nodes_per_axis();
    let grid = SpaceTimeGrid::periodic_square(dt, config.dx, steps, n as f64 * config.dx, config.center)?;
    let stencil = Stencil::new(&config.mollifier, config.eps, config.dx)?;
    let taps = &stencil.taps;
    let r = stencil.reach() as usize;
    let source = NoiseSource::new(grid, seed, stream)?;
    let beta = params.beta_eps;

    let mut snap_steps: Vec<(usize, usize)> = config
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, &s)| ((s / dt).round().clamp(0.0, steps as f64) as usize, i))
        .collect();
    snap_steps.sort();
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut next = 0;

    let mut u: Vec<f64> = (0..n * n)
        .map(|i| {
            let p = grid.node((i % n) as i64, (i / n) as i64);
            u0.eval([p[0] * config.x_scale, p[1] * config.x_scale])
        })
        .collect();
    let mut unew = vec![0.0; n * n];
    let pn = n + 2 * r;
    let mut white = vec![0.0; n * n];
    let mut padded = vec![0.0; pn * pn];
    let inv_dx2 = 1.0 / (config.dx * config.dx);
    let tap_offsets: Vec<(usize, f64)> = taps
        .iter()
        .map(|&(a, b, w)| (((b + r as i64) as usize) * pn + (a + r as i64) as usize, w))
        .collect();

    let record = |k: usize, u: &[f64]| -> Result<LatticeField> {
        LatticeField::new(n, n, config.dx, grid.origin, k as f64 * dt, u.to_vec())
    };

    for k in 0..steps {
        while next < snap_steps.len() && snap_steps[next].0 == k {
            snapshots.push((snap_steps[next].1, record(k, &u)?));
            next += 1;
        }
        if beta != 0.0 {
            crate::parallel::for_each_chunk_mut(&mut white, n, |iy, row| {
                source.clone().fill_row(k, iy as i64, 0, row);
            });
            for py in 0..pn {
                let sy = (py + n - r) % n;
                let dst = &mut padded[py * pn..(py + 1) * pn];
                for (px, d) in dst.iter_mut().enumerate() {
                    *d = white[sy * n + (px + n - r) % n];
                }
            }
        }
        let u_ref = &u;
        let padded_ref = &padded;
        let taps_ref = &tap_offsets;
        crate::parallel::for_each_chunk_mut(&mut unew, n, |iy, row| {
            let up = ((iy + n - 1) % n) * n;
            let dn = ((iy + 1) % n) * n;
            let me = iy * n;
            for ix in 0..n {
                let l = if ix == 0 { n - 1 } else { ix - 1 };
                let rr = if ix + 1 == n { 0 } else { ix + 1 };
                let c = u_ref[me + ix];
                let lap = (u_ref[me + l] + u_ref[me + rr] + u_ref[up + ix] + u_ref[dn + ix] - 4.0 * c) * inv_dx2;
                let mut v = c + 0.5 * dt * lap;
                if beta != 0.0 {
                    let base = iy * pn + ix;
                    let xi: f64 = taps_ref.iter().map(|&(o, w)| w * padded_ref[base + o]).sum();
                    v += beta * c * xi * dt;
                }
                row[ix] = v;
            }
        });
        if let Some(i) = unew.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            let v = unew[i];
            if !v.is_finite() {
                return Err(Error::Integration {
                    step: k + 1,
                    msg: format!("non-finite value at cell ({}, {})", i % n, i / n),
                });
            }
            return Err(Error::Positivity {
                step: k + 1,
                ix: i % n,
                iy: i / n,
                value: v,
                suggested_dt: 0.25 * dt,
            });
        }
        std::mem::swap(&mut u, &mut unew);
    }
    while next < snap_steps.len() {
        snapshots.push((snap_steps[next].1, record(steps, &u)?));
        next += 1;
    }
    snapshots.sort_by_key(|s| s.0);
    Ok(Trajectory {
        dt,
        steps,
        snapshots: snapshots.into_iter().map(|s| s.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Welford;

    fn params(beta_hat: f64) -> ScaleParams {
        ScaleParams::new(0.01, beta_hat, 0.005).unwrap()
    }

    #[test]
    fn rejects_unstable_ratio() {
        let mut c = IntegratorConfig::for_horizon(0.1, 2.0, 0.1, 8.0, 0.0);
        c.dt = 0.5 * c.dx * c.dx;
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
        let mut c = IntegratorConfig::for_horizon(0.1, 2.0, 0.1, 8.0, 0.0);
        c.eps = c.dx;
        assert!(matches!(c.validate(), Err(Error::Resolution(_))));
    }

    #[test]
    fn budget_guard() {
        let mut c = IntegratorConfig::for_horizon(0.01, 2.0, 1.0, 8.0, 0.0);
        c.work_budget = 1e6;
        let e = integrate_she(&InitialCondition::flat(), 1.0, &params(0.5), &c, 0, 0).unwrap_err();
        assert!(matches!(e, Error::Resource(_)));
    }

    #[test]
    fn heat_flow_without_noise() {
        // 256^2 lattice, dx = 0.05, t = 1 against the closed-form semigroup.
        let u0 = InitialCondition::GaussianBump {
            base: 1.0,
            amplitude: 2.0,
            center: [0.0, 0.0],
            width: 1.0,
        };
        let c = IntegratorConfig {
            dt: 0.2 * 0.05 * 0.05,
            dx: 0.05,
            side: 256.0 * 0.05,
            center: [0.0, 0.0],
            eps: 0.1,
            x_scale: 1.0,
            snapshots: vec![1.0],
            work_budget: DEFAULT_WORK_BUDGET,
            mollifier: default_mollifier(),
        };
        let tr = integrate_she(&u0, 1.0, &params(0.0), &c, 0, 0).unwrap();
        let f = tr.last();
        let mut err: f64 = 0.0;
        for iy in 0..f.ny {
            for ix in 0..f.nx {
                let want = u0.u_bar(1.0, f.node(ix, iy)).unwrap();
                err = err.max((f.at(ix, iy) - want).abs() / want);
            }
        }
        assert!(err < 0.02, "{err}");
    }

    #[test]
    fn mean_is_preserved() {
        let c = IntegratorConfig::for_horizon(1.0, 2.0, 2.0, 4.0, 2.0);
        let p = ScaleParams::new(0.01, 0.5, 0.005).unwrap();
        let w: Welford = (0..200u64)
            .map(|s| {
                integrate_she(&InitialCondition::flat(), 2.0, &p, &c, 9, s)
                    .unwrap()
                    .last()
                    .mean()
            })
            .collect();
        assert!((w.mean() - 1.0).abs() < 3.0 * w.stderr(), "{} {}", w.mean(), w.stderr());
    }

    #[test]
    fn deterministic_and_snapshots_ordered() {
        let mut c = IntegratorConfig::for_horizon(1.0, 2.0, 1.0, 3.0, 2.0);
        c.snapshots = vec![1.0, 0.5, 0.0];
        let p = params(0.5);
        let a = integrate_she(&InitialCondition::flat(), 1.0, &p, &c, 3, 1).unwrap();
        let b = integrate_she(&InitialCondition::flat(), 1.0, &p, &c, 3, 1).unwrap();
        assert_eq!(a.last().values, b.last().values);
        let times: Vec<f64> = a.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 3);
        assert!((times[0] - 1.0).abs() < 1e-12 && times[2] == 0.0);
    }
}
