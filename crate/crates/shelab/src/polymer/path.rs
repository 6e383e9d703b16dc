use rand::Rng;
use rand_distr::StandardNormal;

use crate::noise::MollifiedNoise;
use crate::rng::stream_rng;
use crate::{Error, Point, Result};

/// Confined paths are abandoned once acceptance is provably below this.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathMode {
    Free,
    /// Brownian bridge reaching `end` at path time `end_time`.
    Bridge {
        end: Point,
        end_time: f64,
    },
    /// Free path conditioned (by rejection) to stay in the open ball.
    Confined {
        radius: f64,
        center: Point,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSpec {
    pub horizon: f64,
    pub dt: f64,
    pub start: Point,
    pub mode: PathMode,
}

/// Discrete path sampled at `k dt`, `k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub dt: f64,
    pub points: Vec<Point>,
    /// Rejected attempts (confined mode only).
    pub rejections: u64,
}

impl PathSpec {
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(Error::domain("path horizon and step must be positive"));
        }
        let n = self.horizon / self.dt;
        if (n - n.round()).abs() > 1e-8 * n.max(1.0) {
            return Err(Error::domain(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(n.round() as usize)
    }
}

/// One exact Gaussian transition of a (possibly pinned) Brownian motion.
#[inline]
pub(crate) fn step<R: Rng>(rng: &mut R, pos: Point, h: f64, pin: Option<(Point, f64)>, diffusivity: f64) -> Point {
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    match pin {
        None => {
            let s = (diffusivity * h).sqrt();
            [pos[0] + s * z0, pos[1] + s * z1]
        }
        Some((end, remaining)) => {
            if h >= remaining * (1.0 - 1e-9) {
                return end;
            }
            let a = h / remaining;
            let s = (diffusivity * h * (remaining - h) / remaining).sqrt();
            [
                pos[0] + a * (end[0] - pos[0]) + s * z0,
                pos[1] + a * (end[1] - pos[1]) + s * z1,
            ]
        }
    }
}

fn sample_once<R: Rng>(spec: &PathSpec, n: usize, rng: &mut R) -> Vec<Point> {
    let mut pts = Vec::with_capacity(n + 1);
    let mut p = spec.start;
    pts.push(p);
    for k in 0..n {
        let t = k as f64 * spec.dt;
        let pin = match spec.mode {
            PathMode::Bridge { end, end_time } if t < end_time => Some((end, end_time - t)),
            _ => None,
        };
        p = step(rng, p, spec.dt, pin, 1.0);
        pts.push(p);
    }
    pts
}

/// Sample a path with increments `N(0, dt I)`, an exact bridge, or a
/// rejection-confined path.
pub fn sample_path(spec: &PathSpec, seed: u64, stream: u64) -> Result<Path> {
    let n = spec.steps()?;
    let mut rng = stream_rng(seed, stream);
    match spec.mode {
        PathMode::Bridge { end_time, .. } if !(end_time > 0.0) => {
            Err(Error::domain("bridge end time must be positive"))
        }
        PathMode::Confined { radius, center } => {
            if !(radius > 0.0) {
                return Err(Error::domain("confinement radius must be positive"));
            }
            let inside = |p: &Point| (p[0] - center[0]).hypot(p[1] - center[1]) < radius;
            if !inside(&spec.start) {
                return Err(Error::Feasibility("path starts outside the confinement ball".into()));
            }
            let max_attempts = (3.0 / MIN_ACCEPTANCE) as u64;
            let mut rejections = 0u64;
            loop {
                let pts = sample_once(spec, n, &mut rng);
                if pts.iter().all(inside) {
                    return Ok(Path {
                        dt: spec.dt,
                        points: pts,
                        rejections,
                    });
                }
                rejections += 1;
                if rejections >= max_attempts {
                    return Err(Error::Feasibility(format!(
                        "confined acceptance below {MIN_ACCEPTANCE:e} after {rejections} attempts"
                    )));
                }
            }
        }
        _ => Ok(Path {
            dt: spec.dt,
            points: sample_once(spec, n, &mut rng),
            rejections: 0,
        }),
    }
}

/// Itô energy `beta sum_k xi_eps(t_k, B_{t_k}) dt - beta^2 V(0) (s1 - s0) / (2 eps^2)`
/// over the window `[s0, s1)`; path time 0 is noise time `t0` of the grid.
pub fn path_energy(path: &Path, noise: &MollifiedNoise, beta: f64, window: (f64, f64)) -> Result<f64> {
    let g = noise.grid();
    let (s0, s1) = window;
    if (path.dt - g.dt).abs() > 1e-12 * g.dt {
        return Err(Error::domain(format!(
            "path step {} differs from noise step {}",
            path.dt, g.dt
        )));
    }
    let k0 = s0 / g.dt;
    let k1 = s1 / g.dt;
    let aligned = |k: f64| (k - k.round()).abs() < 1e-8;
    if !(s0 >= 0.0 && s1 >= s0) || !aligned(k0) || !aligned(k1) {
        return Err(Error::domain(format!(
            "window [{s0}, {s1}] not aligned with dt {}",
            g.dt
        )));
    }
    let (k0, k1) = (k0.round() as usize, k1.round() as usize);
    if k1 > g.nt || k1 >= path.points.len() {
        return Err(Error::domain(format!("window end {s1} exceeds path or noise horizon")));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    let eps = noise.eps();
    let mut e = 0.0;
    for k in k0..k1 {
        e += noise.value_at_slice(k, path.points[k]);
    }
    Ok(beta * e * g.dt - beta * beta * noise.mollifier().v0() * (s1 - s0) / (2.0 * eps * eps))
}
