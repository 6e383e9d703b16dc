//! Feynman-Kac path ensembles over a fixed mollified environment, and the
//! partition-function estimators built on them.
//!
//! All quantities here live in microscopic units: the mollifier has width
//! `eps` as stored in the noise (usually 1) and path time is noise time.

use std::sync::Arc;

use crate::mathkernel::{InitialCondition, Mollifier, ScaleParams};
use crate::noise::{mollify_in_space, mollify_points, sample_white_noise, MollifiedNoise, PointEval, SpaceTimeGrid};
use crate::polymer::estimate::{EstimateKind, PartitionEstimate, QuenchedValue};
use crate::polymer::path::step;
use crate::rng::{derive, stream_rng};
use crate::{Error, Point, Result};

const PATH_TAG: u64 = 0x9A7B;
const ENV_TAG: u64 = 0xE4F1;
/// Paths per parallel work item.
pub const PATH_CHUNK: usize = 256;

/// Path family paired with a window of the noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FkPaths {
    pub start: Point,
    /// Number of noise steps carrying energy.
    pub steps: usize,
    /// First noise slice of the window.
    pub first_slice: usize,
    /// Read the window backwards: path step `j` sees slice `first + steps - 1 - j`.
    pub reversed: bool,
    /// Pin the path at this point at the end of the window.
    pub bridge_end: Option<Point>,
    /// Indicator of staying in the open ball `(radius, center)` at all steps.
    pub confine: Option<(f64, Point)>,
    /// Free continuation after the window, before the endpoint weight.
    pub tail_time: f64,
}

impl FkPaths {
    pub fn free(start: Point, steps: usize) -> Self {
        Self {
            start,
            steps,
            first_slice: 0,
            reversed: false,
            bridge_end: None,
            confine: None,
            tail_time: 0.0,
        }
    }
}

/// Per-path result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathOutcome {
    /// Energy plus log endpoint weight plus log indicator.
    pub log_weight: f64,
    /// Position at the end of the energy window.
    pub position: Point,
}

/// Simulate `n_paths` paths against `noise` and return their outcomes in
/// path order. `weight` is applied to the final position (after the tail).
pub fn fk_outcomes<W>(
    noise: &MollifiedNoise,
    beta: f64,
    spec: &FkPaths,
    weight: Option<&W>,
    n_paths: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<PathOutcome>>
where
    W: Fn(Point) -> f64 + Sync,
{
    let g = noise.grid();
    if spec.first_slice + spec.steps > g.nt {
        return Err(Error::domain(format!(
            "window of {} steps from slice {} exceeds the {} noise slices",
            spec.steps, spec.first_slice, g.nt
        )));
    }
    if spec.steps == 0 && spec.bridge_end.is_some() {
        return Err(Error::domain("a bridge needs a positive duration"));
    }
    if !(spec.tail_time >= 0.0) {
        return Err(Error::domain("tail time must be non-negative"));
    }
    let dt = g.dt;
    let eps = noise.eps();
    let comp = beta * beta * noise.mollifier().v0() * spec.steps as f64 * dt / (2.0 * eps * eps);
    let duration = spec.steps as f64 * dt;
    let chunks = n_paths.div_ceil(PATH_CHUNK);
    let blocks = crate::parallel::try_map_indexed(chunks, |c| -> Result<Vec<PathOutcome>> {
        let len = PATH_CHUNK.min(n_paths - c * PATH_CHUNK);
        let mut out = Vec::with_capacity(len);
        for i in c * PATH_CHUNK..c * PATH_CHUNK + len {
            // One stream per path keeps paths aligned across estimators.
            let mut rng = stream_rng(seed, derive(&[PATH_TAG, stream, i as u64]));
            let mut p = spec.start;
            let mut inside = true;
            let mut e = 0.0;
            for j in 0..spec.steps {
                if let Some((r, c0)) = spec.confine {
                    inside &= (p[0] - c0[0]).hypot(p[1] - c0[1]) < r;
                }
                let k = if spec.reversed {
                    spec.first_slice + spec.steps - 1 - j
                } else {
                    spec.first_slice + j
                };
                if beta != 0.0 {
                    e += noise.value_at_slice(k, p);
                }
                let pin = spec.bridge_end.map(|end| (end, duration - j as f64 * dt));
                p = step(&mut rng, p, dt, pin, 1.0);
            }
            if let Some((r, c0)) = spec.confine {
                inside &= (p[0] - c0[0]).hypot(p[1] - c0[1]) < r;
            }
            let position = p;
            if spec.tail_time > 0.0 {
                p = step(&mut rng, p, spec.tail_time, None, 1.0);
            }
            let mut lw = if beta != 0.0 { beta * e * dt - comp } else { 0.0 };
            if let Some(w) = weight {
                let v = w(p);
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::numeric(
                        format!("endpoint weight at {p:?} is not a finite non-negative number"),
                        v,
                    ));
                }
                lw += v.ln();
            }
            if !inside {
                lw = f64::NEG_INFINITY;
            }
            out.push(PathOutcome {
                log_weight: lw,
                position,
            });
        }
        Ok(out)
    })?;
    Ok(blocks.into_iter().flatten().collect())
}

fn no_weight() -> Option<&'static fn(Point) -> f64> {
    None
}

fn estimate(outcomes: &[PathOutcome]) -> Result<PartitionEstimate> {
    let logs: Vec<f64> = outcomes.iter().map(|o| o.log_weight).collect();
    PartitionEstimate::from_log_samples(&logs, EstimateKind::Quenched)
}

fn steps_for(t: f64, dt: f64) -> Result<usize> {
    let n = t / dt;
    if !(t >= 0.0) || (n - n.round()).abs() > 1e-8 * n.max(1.0) {
        return Err(Error::domain(format!(
            "time {t} is not a multiple of the noise step {dt}"
        )));
    }
    Ok(n.round() as usize)
}

/// Quenched `Z_t(x) = E_x[Phi_t]` for the given environment.
pub fn partition_function(
    x: Point,
    t: f64,
    params: &ScaleParams,
    noise: &MollifiedNoise,
    n_paths: usize,
    seed: u64,
) -> Result<PartitionEstimate> {
    let steps = steps_for(t, noise.grid().dt)?;
    let o = fk_outcomes(
        noise,
        params.beta_eps,
        &FkPaths::free(x, steps),
        no_weight(),
        n_paths,
        seed,
        0,
    )?;
    estimate(&o)
}

/// Quenched point-to-point `E_{0,x}^{t,y}[Phi_t]` over Brownian bridges.
pub fn point_to_point_partition(
    x: Point,
    y: Point,
    t: f64,
    params: &ScaleParams,
    noise: &MollifiedNoise,
    n_paths: usize,
    seed: u64,
) -> Result<PartitionEstimate> {
    let steps = steps_for(t, noise.grid().dt)?;
    let spec = FkPaths {
        bridge_end: Some(y),
        ..FkPaths::free(x, steps)
    };
    let o = fk_outcomes(noise, params.beta_eps, &spec, no_weight(), n_paths, seed, 1)?;
    estimate(&o)
}

/// Quenched time-reversed partition function of horizon `ell`: paths start
/// at `z` at time `t` and read the noise on `[t - ell, t]` backwards.
pub fn time_reversed_partition(
    z: Point,
    t: f64,
    ell: f64,
    params: &ScaleParams,
    noise: &MollifiedNoise,
    n_paths: usize,
    seed: u64,
) -> Result<PartitionEstimate> {
    if !(ell <= t) {
        return Err(Error::domain(format!("reversed horizon {ell} exceeds t = {t}")));
    }
    let dt = noise.grid().dt;
    let steps = steps_for(ell, dt)?;
    let end = steps_for(t, dt)?;
    let spec = FkPaths {
        first_slice: end - steps,
        reversed: true,
        ..FkPaths::free(z, steps)
    };
    let o = fk_outcomes(noise, params.beta_eps, &spec, no_weight(), n_paths, seed, 2)?;
    estimate(&o)
}

/// Quenched restricted partition function `E_z[Phi_t; path stays in B(z, r)]`,
/// by indicator weighting on the step times. Shares path streams with
/// [`partition_function`], so the two are coupled samplewise.
pub fn restricted_partition(
    z: Point,
    t: f64,
    r: f64,
    params: &ScaleParams,
    noise: &MollifiedNoise,
    n_paths: usize,
    seed: u64,
) -> Result<PartitionEstimate> {
    if !(r > 0.0) {
        return Err(Error::domain("confinement radius must be positive"));
    }
    let steps = steps_for(t, noise.grid().dt)?;
    let spec = FkPaths {
        confine: Some((r, z)),
        ..FkPaths::free(z, steps)
    };
    let o = fk_outcomes(noise, params.beta_eps, &spec, no_weight(), n_paths, seed, 0)?;
    estimate(&o)
}

/// Quenched `W_s(x) = E_x[Phi_s u0(B_{tT} / sqrt T)]` with `x`, `s` micro and
/// `t` macro. Energy accrues on `[0, s]`, the path then moves freely to `tT`.
#[allow(clippy::too_many_arguments)]
pub fn w_martingale(
    x: Point,
    s: f64,
    t: f64,
    params: &ScaleParams,
    u0: &InitialCondition,
    noise: &MollifiedNoise,
    n_paths: usize,
    seed: u64,
) -> Result<PartitionEstimate> {
    let total = t * params.t_micro;
    if !(s <= total * (1.0 + 1e-12)) {
        return Err(Error::domain(format!("s = {s} exceeds tT = {total}")));
    }
    let steps = steps_for(s, noise.grid().dt)?;
    let spec = FkPaths {
        tail_time: (total - s).max(0.0),
        ..FkPaths::free(x, steps)
    };
    let scale = params.t_micro.sqrt();
    let w = |p: Point| u0.eval([p[0] / scale, p[1] / scale]);
    let o = fk_outcomes(noise, params.beta_eps, &spec, Some(&w), n_paths, seed, 0)?;
    estimate(&o)
}

/// Recipe for fresh micro-scale environments.
#[derive(Clone, Debug)]
pub struct Environment {
    pub dt: f64,
    pub dx: f64,
    /// Mollifier width in grid units.
    pub eps: f64,
    pub mollifier: Arc<Mollifier>,
    pub eval: PointEval,
    /// Half-width of the periodic box in units of `sqrt(horizon)`.
    pub spread: f64,
}

impl Environment {
    pub fn new(dt: f64, dx: f64, mollifier: Arc<Mollifier>) -> Self {
        Self {
            dt,
            dx,
            eps: 1.0,
            mollifier,
            eval: PointEval::Exact,
            spread: 8.0,
        }
    }

    /// Periodic box holding all paths within `spread` standard deviations
    /// of a disc of radius `radius` around `center`.
    pub fn grid(&self, center: Point, radius: f64, horizon: f64) -> Result<SpaceTimeGrid> {
        let nt = steps_for(horizon, self.dt)?.max(1);
        let half = radius + self.spread * horizon.sqrt() + self.mollifier.radius() * self.eps + 2.0 * self.dx;
        SpaceTimeGrid::periodic_square(self.dt, self.dx, nt, 2.0 * half, center)
    }

    /// Environment number `replica` of the family keyed by `seed`.
    pub fn realize(&self, grid: SpaceTimeGrid, seed: u64, replica: u64) -> Result<MollifiedNoise> {
        let field = sample_white_noise(grid, seed, derive(&[ENV_TAG, replica]))?;
        let noise = match self.eval {
            PointEval::Exact => mollify_points(field, self.mollifier.clone(), self.eps)?,
            PointEval::Bilinear => mollify_in_space(field, self.mollifier.clone(), self.eps)?,
        };
        Ok(noise.with_eval(self.eval))
    }
}

/// Run `quenched` on `n_replicas` independent environments and average.
///
/// Returns the annealed estimate and the per-replica quenched values.
pub fn annealed<F>(
    env: &Environment,
    grid: SpaceTimeGrid,
    n_replicas: usize,
    seed: u64,
    quenched: F,
) -> Result<(PartitionEstimate, Vec<QuenchedValue>)>
where
    F: Fn(&MollifiedNoise, u64) -> Result<PartitionEstimate>,
{
    let mut values = Vec::with_capacity(n_replicas);
    for r in 0..n_replicas as u64 {
        let noise = env.realize(grid, seed, r)?;
        values.push(QuenchedValue::from(quenched(&noise, derive(&[seed, r]))?));
    }
    let xs: Vec<f64> = values.iter().map(|q| q.value).collect();
    Ok((PartitionEstimate::from_samples(&xs, EstimateKind::Annealed)?, values))
}
