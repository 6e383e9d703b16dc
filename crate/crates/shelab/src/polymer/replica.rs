//! Noise-free replica oracles.
//!
//! Averaging a product of two partition functions over the environment
//! leaves `exp(beta gamma int V(B - B'))` for independent Brownian motions,
//! so every second-moment quantity reduces to a collision functional of
//! the separation process, simulated by [`CollisionWalk`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::mathkernel::{InitialCondition, Mollifier, ScaleParams};
use crate::noise::MollifiedNoise;
use crate::polymer::ensemble::{fk_outcomes, FkPaths};
use crate::polymer::estimate::{EstimateKind, PartitionEstimate};
use crate::polymer::pair::{CollisionWalk, Leg, Shift, StepRule};
use crate::rng::{derive, stream_rng};
use crate::stats::Welford;
use crate::{Error, Point, Result};

/// Samples per random stream.
pub const REPLICA_BLOCK: usize = 1024;

/// Shared settings of the replica estimators.
#[derive(Clone, Copy, Debug)]
pub struct ReplicaOpts<'m> {
    pub mollifier: &'m Mollifier,
    pub rule: StepRule,
    pub seed: u64,
}

impl<'m> ReplicaOpts<'m> {
    pub fn new(mollifier: &'m Mollifier, seed: u64) -> Self {
        Self {
            mollifier,
            rule: StepRule::default(),
            seed,
        }
    }
}

/// `n` samples of `f`, drawn in fixed blocks so the result does not depend
/// on the thread count.
pub fn block_samples<F>(n: usize, seed: u64, tag: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(REPLICA_BLOCK);
    crate::parallel::map_indexed(blocks, |b| {
        let mut rng = stream_rng(seed, derive(&[tag, b as u64]));
        let len = REPLICA_BLOCK.min(n - b * REPLICA_BLOCK);
        (0..len).map(|_| f(&mut rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

fn replica_estimate(xs: &[f64]) -> Result<PartitionEstimate> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("replica functional overflowed", f64::INFINITY));
    }
    PartitionEstimate::from_samples(xs, EstimateKind::Replica)
}

fn exact_one(n: usize) -> PartitionEstimate {
    PartitionEstimate {
        mean: 1.0,
        stderr: 0.0,
        n_samples: n as u64,
        kind: EstimateKind::Replica,
    }
}

fn check_pairs(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::domain("at least two replica pairs are needed"));
    }
    Ok(())
}

/// `E[Z^beta_t(x) Z^gamma_t(y)] = E[exp(beta gamma int_0^t V(D_s) ds)]` with
/// `D` a Brownian motion of diffusivity 2 started at `x - y`.
#[allow(clippy::too_many_arguments)]
pub fn replica_second_moment(
    x: Point,
    y: Point,
    beta_hat: f64,
    gamma_hat: f64,
    t: f64,
    params: &ScaleParams,
    opts: &ReplicaOpts,
    n_pairs: usize,
) -> Result<PartitionEstimate> {
    check_pairs(n_pairs)?;
    if !(beta_hat * gamma_hat < 1.0) || beta_hat < 0.0 || gamma_hat < 0.0 {
        return Err(Error::Subcritical(beta_hat * gamma_hat));
    }
    let bg = params.beta_for(beta_hat) * params.beta_for(gamma_hat);
    if bg == 0.0 {
        return Ok(exact_one(n_pairs));
    }
    let walk = CollisionWalk::new(
        opts.mollifier,
        Leg::free([x[0] - y[0], x[1] - y[1]], 2.0),
        Leg::fixed([0.0, 0.0]),
        t,
    )?
    .with_rule(opts.rule);
    let xs = block_samples(n_pairs, opts.seed, 0x5EC0, |rng| {
        (bg * walk.run(rng).integrals[0]).exp()
    });
    replica_estimate(&xs)
}

/// Second moment of the point-to-point partition function over `[0, big_l]`;
/// the separation of two bridges is a bridge of diffusivity 2 from 0 to 0.
pub fn p2p_second_moment(big_l: f64, beta: f64, opts: &ReplicaOpts, n_pairs: usize) -> Result<PartitionEstimate> {
    check_pairs(n_pairs)?;
    if beta == 0.0 {
        return Ok(exact_one(n_pairs));
    }
    let walk = CollisionWalk::new(
        opts.mollifier,
        Leg::bridge([0.0, 0.0], [0.0, 0.0], big_l, 2.0),
        Leg::fixed([0.0, 0.0]),
        big_l,
    )?
    .with_rule(opts.rule);
    let b2 = beta * beta;
    let xs = block_samples(n_pairs, opts.seed, 0xB21D, |rng| {
        (b2 * walk.run(rng).integrals[0]).exp()
    });
    replica_estimate(&xs)
}

/// `E[P Z_ell(0) Zrev_{L,ell}(x)]` with `P = E^{L,x}_{0,0}[Phi_L]`.
///
/// The two short partition functions use disjoint windows, so given the
/// bridge positions at `ell` and `L - ell` the product splits into two
/// independent bridge-against-free collision functionals.
pub fn llt_cross_moment(
    big_l: f64,
    ell: f64,
    x: Point,
    beta: f64,
    opts: &ReplicaOpts,
    n_pairs: usize,
) -> Result<PartitionEstimate> {
    check_pairs(n_pairs)?;
    if !(ell > 0.0 && 2.0 * ell <= big_l) {
        return Err(Error::domain(format!(
            "window ell = {ell} must satisfy 0 < 2 ell <= L = {big_l}"
        )));
    }
    if beta == 0.0 {
        return Ok(exact_one(n_pairs));
    }
    let b2 = beta * beta;
    let m = opts.mollifier;
    let rule = opts.rule;
    let sample = |rng: &mut ChaCha8Rng| -> Result<f64> {
        // Bridge 0 -> x over [0, L] observed at ell and L - ell.
        let sd1 = (ell * (big_l - ell) / big_l).sqrt();
        let b1 = [
            x[0] * ell / big_l + sd1 * rng.sample::<f64, _>(StandardNormal),
            x[1] * ell / big_l + sd1 * rng.sample::<f64, _>(StandardNormal),
        ];
        let h = big_l - 2.0 * ell;
        let a = h / (big_l - ell);
        let sd2 = (h * ell / (big_l - ell)).sqrt();
        let b2p = [
            b1[0] + a * (x[0] - b1[0]) + sd2 * rng.sample::<f64, _>(StandardNormal),
            b1[1] + a * (x[1] - b1[1]) + sd2 * rng.sample::<f64, _>(StandardNormal),
        ];
        let w1 = CollisionWalk::new(
            m,
            Leg::bridge([0.0, 0.0], b1, ell, 1.0),
            Leg::free([0.0, 0.0], 1.0),
            ell,
        )?
        .with_rule(rule);
        let w2 = CollisionWalk::new(m, Leg::bridge(x, b2p, ell, 1.0), Leg::free(x, 1.0), ell)?.with_rule(rule);
        let i = w1.run(rng).integrals[0] + w2.run(rng).integrals[0];
        Ok((b2 * i).exp())
    };
    let xs = block_samples(n_pairs, opts.seed, 0xC205, |rng| sample(rng).unwrap_or(f64::NAN));
    replica_estimate(&xs)
}

/// Factorisation error `E[(P - Z_ell(0) Zrev(x))^2]` assembled from replica
/// moments, with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LltError {
    pub p2: PartitionEstimate,
    pub cross: PartitionEstimate,
    pub z2: PartitionEstimate,
    pub error: f64,
    pub stderr: f64,
}

pub fn llt_error(big_l: f64, ell: f64, x: Point, beta: f64, opts: &ReplicaOpts, n_pairs: usize) -> Result<LltError> {
    let p2 = p2p_second_moment(big_l, beta, opts, n_pairs)?;
    let o2 = ReplicaOpts {
        seed: derive(&[opts.seed, 1]),
        ..*opts
    };
    let cross = llt_cross_moment(big_l, ell, x, beta, &o2, n_pairs)?;
    let o3 = ReplicaOpts {
        seed: derive(&[opts.seed, 2]),
        ..*opts
    };
    let z2 = second_moment_at(beta * beta, [0.0, 0.0], ell, &o3, n_pairs)?;
    let error = p2.mean - 2.0 * cross.mean + z2.mean * z2.mean;
    let stderr = (p2.stderr.powi(2) + 4.0 * cross.stderr.powi(2) + (2.0 * z2.mean * z2.stderr).powi(2)).sqrt();
    Ok(LltError {
        p2,
        cross,
        z2,
        error,
        stderr,
    })
}

/// `E[exp(bg int_0^t V(D))]`, `D` of diffusivity 2 from `x`, with raw coupling.
pub fn second_moment_at(bg: f64, x: Point, t: f64, opts: &ReplicaOpts, n_pairs: usize) -> Result<PartitionEstimate> {
    check_pairs(n_pairs)?;
    if bg == 0.0 {
        return Ok(exact_one(n_pairs));
    }
    let walk = CollisionWalk::new(opts.mollifier, Leg::free(x, 2.0), Leg::fixed([0.0, 0.0]), t)?.with_rule(opts.rule);
    let xs = block_samples(n_pairs, opts.seed, 0x5EC0, |rng| {
        (bg * walk.run(rng).integrals[0]).exp()
    });
    replica_estimate(&xs)
}

/// `E[B^2] = 2 (E[e^{beta^2 int_0^ell V(sqrt2 W)}] - E[e^{beta^2 int_0^ell V(sqrt2 W + x s / L)}])`
/// with common random numbers, so it vanishes identically at `x = 0`.
pub fn llt_b_term(
    big_l: f64,
    ell: f64,
    x: Point,
    beta: f64,
    opts: &ReplicaOpts,
    n_pairs: usize,
) -> Result<PartitionEstimate> {
    check_pairs(n_pairs)?;
    if beta == 0.0 || (x[0] == 0.0 && x[1] == 0.0) {
        return Ok(PartitionEstimate {
            mean: 0.0,
            stderr: 0.0,
            n_samples: n_pairs as u64,
            kind: EstimateKind::Replica,
        });
    }
    let drift = Shift {
        offset: [0.0, 0.0],
        drift: [x[0] / big_l, x[1] / big_l],
    };
    let walk = CollisionWalk::new(opts.mollifier, Leg::free([0.0, 0.0], 2.0), Leg::fixed([0.0, 0.0]), ell)?
        .with_rule(opts.rule)
        .with_shifts(vec![Shift::default(), drift]);
    let b2 = beta * beta;
    let xs = block_samples(n_pairs, opts.seed, 0xB7E4, |rng| {
        let r = walk.run(rng);
        2.0 * ((b2 * r.integrals[0]).exp() - (b2 * r.integrals[1]).exp())
    });
    replica_estimate(&xs)
}

/// `E[(Z_ell(x) - Z_ell(0))^2] = 2 (E[Z^2] - E[Z_x Z_0])`, with common random
/// numbers and the antithetic pair `+x, -x`.
pub fn decorrelation(ell: f64, x: Point, beta: f64, opts: &ReplicaOpts, n_pairs: usize) -> Result<PartitionEstimate> {
    check_pairs(n_pairs)?;
    if beta == 0.0 || (x[0] == 0.0 && x[1] == 0.0) {
        return Ok(PartitionEstimate {
            mean: 0.0,
            stderr: 0.0,
            n_samples: n_pairs as u64,
            kind: EstimateKind::Replica,
        });
    }
    let walk = CollisionWalk::new(opts.mollifier, Leg::free([0.0, 0.0], 2.0), Leg::fixed([0.0, 0.0]), ell)?
        .with_rule(opts.rule)
        .with_shifts(vec![
            Shift::default(),
            Shift::constant(x),
            Shift::constant([-x[0], -x[1]]),
        ]);
    let b2 = beta * beta;
    let xs = block_samples(n_pairs, opts.seed, 0xDEC0, |rng| {
        let r = walk.run(rng);
        let e = |i: f64| (b2 * i).exp();
        2.0 * (e(r.integrals[0]) - 0.5 * (e(r.integrals[1]) + e(r.integrals[2])))
    });
    replica_estimate(&xs)
}

/// Integrand of the bracket `<W^(beta,u0)(x), W^(gamma,v0)(y)>` at time `s`.
pub enum QuadVarMode<'a> {
    /// Noise-free: `beta gamma E[V(B_s - B'_s) e^{beta gamma int_0^s V(B - B')} u0 v0]`.
    Replica(&'a ReplicaOpts<'a>),
    /// Shared noise, independent path pairs; `n_pairs` pairs per call.
    Quenched { noise: &'a MollifiedNoise, seed: u64 },
}

/// `x`, `y`, `s` are micro, `t` is macro: the endpoint weights read
/// `u0(B_{tT} / sqrt T)` and `v0(B'_{tT} / sqrt T)`.
#[allow(clippy::too_many_arguments)]
pub fn quad_variation_density(
    x: Point,
    y: Point,
    s: f64,
    t: f64,
    betas: (f64, f64),
    params: &ScaleParams,
    data: (&InitialCondition, &InitialCondition),
    mode: QuadVarMode,
    n_pairs: usize,
) -> Result<PartitionEstimate> {
    check_pairs(n_pairs)?;
    let total = t * params.t_micro;
    if !(s > 0.0 && s <= total * (1.0 + 1e-12)) {
        return Err(Error::domain(format!("need 0 < s <= tT = {total}, got s = {s}")));
    }
    let (b, g) = (params.beta_for(betas.0), params.beta_for(betas.1));
    let kind = match mode {
        QuadVarMode::Replica(_) => EstimateKind::Replica,
        QuadVarMode::Quenched { .. } => EstimateKind::Quenched,
    };
    if b * g == 0.0 {
        return Ok(PartitionEstimate {
            mean: 0.0,
            stderr: 0.0,
            n_samples: n_pairs as u64,
            kind,
        });
    }
    let scale = params.t_micro.sqrt();
    let tail = (total - s).max(0.0);
    let (u0, v0) = data;
    match mode {
        QuadVarMode::Replica(opts) => {
            let m = opts.mollifier;
            let walk = CollisionWalk::new(m, Leg::free(x, 1.0), Leg::free(y, 1.0), s)?.with_rule(opts.rule);
            let xs = block_samples(n_pairs, opts.seed, 0x9A0D, |rng| {
                let r = walk.run(rng);
                let d = [r.a[0] - r.b[0], r.a[1] - r.b[1]];
                let mut w = b * g * m.v(d) * (b * g * r.integrals[0]).exp();
                if !(u0.is_flat() && v0.is_flat()) {
                    let ea = crate::polymer::path::step(rng, r.a, tail, None, 1.0);
                    let eb = crate::polymer::path::step(rng, r.b, tail, None, 1.0);
                    w *= u0.eval([ea[0] / scale, ea[1] / scale]) * v0.eval([eb[0] / scale, eb[1] / scale]);
                }
                w
            });
            replica_estimate(&xs)
        }
        QuadVarMode::Quenched { noise, seed } => {
            let steps = (s / noise.grid().dt).round() as usize;
            if ((steps as f64) * noise.grid().dt - s).abs() > 1e-9 * s {
                return Err(Error::domain(format!("s = {s} is not a multiple of the noise step")));
            }
            let eps = noise.eps();
            let wa = |p: Point| u0.eval([p[0] / scale, p[1] / scale]);
            let wb = |p: Point| v0.eval([p[0] / scale, p[1] / scale]);
            let spec_a = FkPaths {
                tail_time: tail,
                ..FkPaths::free(x, steps)
            };
            let spec_b = FkPaths {
                tail_time: tail,
                ..FkPaths::free(y, steps)
            };
            let oa = fk_outcomes(noise, b, &spec_a, Some(&wa), n_pairs, seed, 10)?;
            let ob = fk_outcomes(noise, g, &spec_b, Some(&wb), n_pairs, seed, 11)?;
            let m = noise.mollifier();
            let w: Welford = oa
                .iter()
                .zip(&ob)
                .map(|(pa, pb)| {
                    let d = [
                        (pa.position[0] - pb.position[0]) / eps,
                        (pa.position[1] - pb.position[1]) / eps,
                    ];
                    b * g * m.v(d) / (eps * eps) * (pa.log_weight + pb.log_weight).exp()
                })
                .collect();
            PartitionEstimate::from_welford(&w, kind)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymer::ensemble::Environment;
    use std::sync::Arc;

    fn params() -> ScaleParams {
        ScaleParams::new(0.01, 0.5, 0.005).unwrap()
    }

    #[test]
    fn zero_coupling_is_exactly_one() {
        let m = Mollifier::bump();
        let o = ReplicaOpts::new(&m, 1);
        let e = replica_second_moment([0.0, 0.0], [0.0, 0.0], 0.0, 0.5, 100.0, &params(), &o, 100).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
    }

    #[test]
    fn second_moment_grows_with_time() {
        let m = Mollifier::bump();
        let o = ReplicaOpts::new(&m, 2);
        let p = params();
        let a = replica_second_moment([0.0, 0.0], [0.0, 0.0], 0.5, 0.5, 10.0, &p, &o, 20_000).unwrap();
        let b = replica_second_moment([0.0, 0.0], [0.0, 0.0], 0.5, 0.5, 1000.0, &p, &o, 20_000).unwrap();
        assert!(a.mean > 1.0 && b.mean > a.mean - 2.0 * a.stderr.hypot(b.stderr));
        assert!(b.mean < 4.0 / 3.0 + 0.3);
    }

    #[test]
    fn short_time_expansion() {
        // For small beta: E[e^{b I}] ~ 1 + b E[I], and E[I] at D_0 = 0 over
        // a short time t is ~ V(0) t.
        let m = Mollifier::bump();
        let o = ReplicaOpts::new(&m, 3);
        let e = second_moment_at(1e-3, [0.0, 0.0], 0.01, &o, 2000).unwrap();
        let want = 1.0 + 1e-3 * m.v0() * 0.01;
        assert!((e.mean - want).abs() < 0.05 * (want - 1.0), "{} {want}", e.mean);
    }

    #[test]
    fn b_term_and_decorrelation_vanish_at_origin() {
        let m = Mollifier::bump();
        let o = ReplicaOpts::new(&m, 4);
        assert_eq!(llt_b_term(1e4, 10.0, [0.0, 0.0], 0.58, &o, 100).unwrap().mean, 0.0);
        assert_eq!(decorrelation(10.0, [0.0, 0.0], 0.58, &o, 100).unwrap().mean, 0.0);
        let d = decorrelation(10.0, [1.0, 0.0], 0.58, &o, 5000).unwrap();
        assert!(d.mean > 0.0);
    }

    #[test]
    fn llt_cross_requires_window() {
        let m = Mollifier::bump();
        let o = ReplicaOpts::new(&m, 5);
        assert!(llt_cross_moment(100.0, 60.0, [0.0, 0.0], 0.5, &o, 10).is_err());
    }

    #[test]
    fn quad_variation_zero_cases() {
        let m = Mollifier::bump();
        let o = ReplicaOpts::new(&m, 6);
        let p = params();
        let flat = InitialCondition::flat();
        let z = quad_variation_density(
            [0.0, 0.0],
            [0.0, 0.0],
            1.0,
            1.0,
            (0.0, 0.5),
            &p,
            (&flat, &flat),
            QuadVarMode::Replica(&o),
            10,
        )
        .unwrap();
        assert_eq!(z.mean, 0.0);
        let far = quad_variation_density(
            [0.0, 0.0],
            [40.0, 0.0],
            1.0,
            1.0,
            (0.5, 0.5),
            &p,
            (&flat, &flat),
            QuadVarMode::Replica(&o),
            2000,
        )
        .unwrap();
        assert_eq!(far.mean, 0.0);
    }

    #[test]
    fn quad_variation_modes_agree() {
        let m = Arc::new(Mollifier::bump());
        let o = ReplicaOpts::new(&m, 7);
        let p = params();
        let flat = InitialCondition::flat();
        let s = 2.0;
        let rep = quad_variation_density(
            [0.0, 0.0],
            [0.0, 0.0],
            s,
            1.0,
            (0.5, 0.5),
            &p,
            (&flat, &flat),
            QuadVarMode::Replica(&o),
            40_000,
        )
        .unwrap();
        let env = Environment::new(0.05, 0.25, m.clone());
        let g = env.grid([0.0, 0.0], 0.0, s).unwrap();
        let vals: Welford = (0..200u64)
            .map(|r| {
                let noise = env.realize(g, 31, r).unwrap();
                quad_variation_density(
                    [0.0, 0.0],
                    [0.0, 0.0],
                    s,
                    1.0,
                    (0.5, 0.5),
                    &p,
                    (&flat, &flat),
                    QuadVarMode::Quenched { noise: &noise, seed: r },
                    400,
                )
                .unwrap()
                .mean
            })
            .collect();
        let q = PartitionEstimate::from_welford(&vals, EstimateKind::Annealed).unwrap();
        assert!(rep.agrees_with(&q, 3.0), "{rep:?} {q:?}");
    }
}
