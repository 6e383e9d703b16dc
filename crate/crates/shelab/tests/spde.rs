use shelab::mathkernel::{InitialCondition, ScaleParams};
use shelab::spde::{integrate_she, IntegratorConfig};
use shelab::stats::Welford;

fn second_moment(dt: f64, reps: u64) -> Welford {
    let p = ScaleParams::from_horizon(1e4, 0.5, 0.005).unwrap();
    let mut cfg = IntegratorConfig::for_horizon(1.0, 2.0, 4.0, 4.0, 2.0);
    cfg.dt = dt;
    (0..reps)
        .map(|r| {
            let f = integrate_she(&InitialCondition::flat(), 4.0, &p, &cfg, 17, r).unwrap();
            let last = f.last();
            assert!(last.values.iter().all(|&v| v > 0.0));
            last.values.iter().map(|v| v * v).sum::<f64>() / last.values.len() as f64
        })
        .collect()
}

#[test]
fn halving_the_step_stays_within_noise() {
    let coarse = second_moment(0.05, 150);
    let fine = second_moment(0.025, 150);
    let se = coarse.stderr().hypot(fine.stderr());
    assert!(
        (coarse.mean() - fine.mean()).abs() < 3.0 * se,
        "{} {} {se}",
        coarse.mean(),
        fine.mean()
    );
}
