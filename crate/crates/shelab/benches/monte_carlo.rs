//! Replica, Feynman-Kac and lattice kernels under the rayon pool and under a
//! single worker. Build with `--no-default-features` for the sequential
//! fallback; the group names carry the mode.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use shelab::mathkernel::{InitialCondition, Mollifier, ScaleParams};
use shelab::parallel::{enabled, with_threads};
use shelab::polymer::{partition_function, replica_second_moment, Environment, ReplicaOpts};
use shelab::spde::{integrate_she, IntegratorConfig};

fn modes() -> Vec<(&'static str, Option<usize>)> {
    if enabled() {
        vec![("rayon", None), ("rayon-1-thread", Some(1))]
    } else {
        vec![("sequential", None)]
    }
}

fn replica(c: &mut Criterion) {
    let m = Mollifier::bump();
    let p = ScaleParams::from_horizon(1e4, 0.5, 0.005).unwrap();
    let mut g = c.benchmark_group("replica_second_moment");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(name, |b| {
            b.iter(|| {
                with_threads(threads, || {
                    let o = ReplicaOpts::new(&m, 1);
                    black_box(replica_second_moment([0.0, 0.0], [0.0, 0.0], 0.5, 0.5, 1e4, &p, &o, 2000).unwrap())
                })
            })
        });
    }
    g.finish();
}

fn feynman_kac(c: &mut Criterion) {
    let env = Environment::new(0.1, 0.5, Arc::new(Mollifier::bump()));
    let grid = env.grid([0.0, 0.0], 0.0, 4.0).unwrap();
    let noise = env.realize(grid, 3, 0).unwrap();
    let p = ScaleParams::from_horizon(1e4, 0.5, 0.005).unwrap();
    let mut g = c.benchmark_group("partition_function");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(name, |b| {
            b.iter(|| {
                with_threads(threads, || {
                    black_box(partition_function([0.0, 0.0], 4.0, &p, &noise, 2000, 5).unwrap())
                })
            })
        });
    }
    g.finish();
}

fn lattice(c: &mut Criterion) {
    let p = ScaleParams::from_horizon(1e4, 0.5, 0.005).unwrap();
    let cfg = IntegratorConfig::for_horizon(1.0, 2.0, 4.0, 4.0, 2.0);
    let mut g = c.benchmark_group("integrate_she");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(name, |b| {
            b.iter(|| {
                with_threads(threads, || {
                    black_box(integrate_she(&InitialCondition::flat(), 4.0, &p, &cfg, 7, 0).unwrap())
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, replica, feynman_kac, lattice);
criterion_main!(benches);
