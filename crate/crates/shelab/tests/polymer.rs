use std::sync::Arc;

use shelab::mathkernel::{Mollifier, ScaleParams};
use shelab::polymer::{annealed, partition_function, replica_second_moment, Environment, ReplicaOpts};
use shelab::rng::derive;
use shelab::stats::{covariance, Welford};

fn env() -> Environment {
    Environment::new(0.1, 0.5, Arc::new(Mollifier::bump()))
}

#[test]
fn martingale_means_and_orthogonal_increments() {
    let e = env();
    let p = ScaleParams::from_horizon(1e4, 0.5, 0.005).unwrap();
    let (s1, s2) = (2.0, 6.0);
    let grid = e.grid([0.0, 0.0], 0.0, s2).unwrap();
    let mut z1 = Vec::new();
    let mut z2 = Vec::new();
    for r in 0..400u64 {
        let noise = e.realize(grid, 9, r).unwrap();
        let seed = derive(&[9, r]);
        z1.push(partition_function([0.0, 0.0], s1, &p, &noise, 1000, seed).unwrap().mean);
        z2.push(partition_function([0.0, 0.0], s2, &p, &noise, 1000, seed).unwrap().mean);
    }
    for zs in [&z1, &z2] {
        let w: Welford = zs.iter().copied().collect();
        assert!((w.mean() - 1.0).abs() < 3.0 * w.stderr(), "{} {}", w.mean(), w.stderr());
    }
    let inc: Vec<f64> = z2.iter().zip(&z1).map(|(b, a)| b - a).collect();
    let c = covariance(&z1, &inc);
    let prods: Welford = z1.iter().zip(&inc).map(|(a, d)| (a - 1.0) * d).collect();
    assert!(c.abs() < 3.0 * prods.stderr(), "{c} {}", prods.stderr());
}

#[test]
fn annealed_second_moment_matches_replica_oracle() {
    let e = env();
    let m = Mollifier::bump();
    for (i, &beta_hat) in [0.3, 0.5, 0.7].iter().enumerate() {
        let p = ScaleParams::from_horizon(1e4, beta_hat, 0.005).unwrap();
        for (j, &t) in [1.0, 4.0, 16.0].iter().enumerate() {
            let grid = e.grid([0.0, 0.0], 0.0, t).unwrap();
            let seed = derive(&[3, i as u64, j as u64]);
            let (_, vals) = annealed(&e, grid, 300, seed, |noise, sd| {
                partition_function([0.0, 0.0], t, &p, noise, 1000, sd)
            })
            .unwrap();
            let sq: Welford = vals.iter().map(|q| q.value * q.value - q.stderr * q.stderr).collect();
            let o = ReplicaOpts::new(&m, seed ^ 1);
            let rep = replica_second_moment([0.0, 0.0], [0.0, 0.0], beta_hat, beta_hat, t, &p, &o, 20_000).unwrap();
            let se = sq.stderr().hypot(rep.stderr);
            assert!(
                (sq.mean() - rep.mean).abs() < 3.0 * se,
                "beta_hat {beta_hat}, t {t}: noise {} replica {} se {se}",
                sq.mean(),
                rep.mean
            );
        }
    }
}
