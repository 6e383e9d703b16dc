//! Property tests of the deterministic invariants.

use proptest::prelude::*;

use shelab::experiments::report::fmt_float;
use shelab::experiments::{L2Config, Row, StatReport};
use shelab::limitfield::{i_forms, CovKernel, ObservableSpec, TestFunction};
use shelab::mathkernel::quadrature::{integrate, integrate_2d};
use shelab::mathkernel::{heat_kernel, heat_kernel_between, InitialCondition, Mollifier, ScaleParams, TransformF};
use shelab::rng::CounterNormals;
use shelab::spde::{integrate_she, IntegratorConfig};
use shelab::Error;

fn point(r: f64) -> impl Strategy<Value = [f64; 2]> {
    (-r..r, -r..r).prop_map(|(a, b)| [a, b])
}

fn time() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.25, 0.5, 1.0, 2.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn heat_semigroup(s in time(), t in time(), x in point(2.0), y in point(2.0)) {
        let r = 12.0 * (s + t).sqrt() + 2.0;
        let c = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
        let v = integrate_2d(
            |a, b| {
                let z = [a, b];
                heat_kernel_between(s, x, z).unwrap() * heat_kernel_between(t, z, y).unwrap()
            },
            (c[0] - r, c[0] + r),
            |_| (c[1] - r, c[1] + r),
            1e-12,
            1e-11,
        )
        .unwrap()
        .value;
        let want = heat_kernel_between(s + t, x, y).unwrap();
        prop_assert!((v - want).abs() < 1e-8, "{} {}", v, want);
    }

    #[test]
    fn heat_kernel_normalised(t in prop::sample::select(vec![0.1f64, 1.0, 10.0])) {
        let r = 14.0 * t.sqrt();
        let v = integrate_2d(|a, b| heat_kernel(t, [a, b]).unwrap(), (-r, r), |_| (-r, r), 1e-12, 1e-11)
            .unwrap()
            .value;
        prop_assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pair_potential_peaks_at_origin_and_has_compact_support(x in point(3.0)) {
        let m = Mollifier::bump();
        prop_assert!(m.v(x) <= m.v0() + 1e-12);
        if x[0].hypot(x[1]) > m.v_support_radius() {
            prop_assert_eq!(m.v(x), 0.0);
        }
    }

    #[test]
    fn scales_decrease_in_horizon(a in 1.5f64..8.0, gap in 0.1f64..3.0, b in 0.05f64..0.95) {
        let p = ScaleParams::from_horizon(10f64.powf(a), b, 0.005).unwrap();
        let q = ScaleParams::from_horizon(10f64.powf(a + gap), b, 0.005).unwrap();
        prop_assert!(q.ell_t < p.ell_t);
        prop_assert!(q.m_t < p.m_t);
        prop_assert!(q.beta_eps < p.beta_eps);
    }

    #[test]
    fn tilted_and_untilted_coefficients_agree(
        beta in 0.1f64..0.9,
        u in 0.2f64..3.0,
        which in 0usize..3,
        p in 0.1f64..2.5,
    ) {
        let f = match which {
            0 => TransformF::Identity,
            1 => TransformF::Log,
            _ => TransformF::Power(p),
        };
        let (a, b) = i_forms(u, &f, beta).unwrap();
        prop_assert!((a - b).abs() < 1e-6, "{} {}", a, b);
    }

    #[test]
    fn heat_flow_respects_data_bounds(a in 0.0f64..0.99, t in 0.0f64..3.0, x in point(5.0)) {
        let u0 = InitialCondition::sine(a);
        let v = u0.u_bar(t, x).unwrap();
        prop_assert!(v >= u0.lower() - 1e-12 && v <= u0.upper() + 1e-12);
        prop_assert_eq!(InitialCondition::flat().u_bar(t, x).unwrap(), 1.0);
    }

    #[test]
    fn floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn counter_normals_are_random_access(seed in any::<u64>(), first in 0u64..1_000_000, len in 1usize..40) {
        let mut g = CounterNormals::new(seed, 1);
        let mut buf = vec![0.0; len];
        g.fill(first, &mut buf);
        for (k, &z) in buf.iter().enumerate() {
            prop_assert_eq!(z, g.at(first + k as u64));
        }
    }

    #[test]
    fn supercritical_beta_names_the_key(b in 1.0f64..5.0) {
        let c = L2Config { beta_hat: b, ..L2Config::default() };
        match c.validate() {
            Err(Error::Config { key, .. }) => prop_assert_eq!(key, "beta_hat"),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn report_csv_quotes_round_trip(name in "[ -~]{0,12}", v in -1e6f64..1e6) {
        let mut r = StatReport::new("x", "h".into(), 1);
        r.push(Row::new(name.clone(), v, 0.0, 1));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let rec = rd.records().next().unwrap().unwrap();
        prop_assert_eq!(&rec[2], name.as_str());
        prop_assert_eq!(rec[7].parse::<f64>().unwrap(), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn kernel_is_symmetric_and_psd(
        c in point(1.0),
        sd in 0.5f64..1.5,
        ba in 0.1f64..0.8,
        bb in 0.1f64..0.8,
        log in any::<bool>(),
    ) {
        let a = ObservableSpec::new(TestFunction::standard([0.0, 0.0]), 1.0, TransformF::Identity, ba, InitialCondition::flat()).unwrap();
        let f = TestFunction::Gaussian { mass: 1.0, center: c, sd };
        let g = if log { TransformF::Log } else { TransformF::Identity };
        let b = ObservableSpec::new(f, 0.5, g, bb, InitialCondition::sine(0.5)).unwrap();
        let k = CovKernel::build(&[a.clone(), b.clone()]).unwrap();
        let k2 = CovKernel::build(&[b, a]).unwrap();
        prop_assert!((k.get(0, 1) - k2.get(1, 0)).abs() <= 1e-9 * k.get(0, 1).abs().max(1e-12));
        prop_assert!(k.checked_eigen().is_ok());
    }

    #[test]
    fn zero_disorder_lattice_preserves_the_mean(a in 0.0f64..0.9) {
        let p = ScaleParams::from_horizon(1e4, 0.0, 0.005).unwrap();
        let mut cfg = IntegratorConfig::for_horizon(1.0, 2.0, 1.0, 0.0, 8.0);
        cfg.x_scale = 0.7;
        cfg.snapshots = vec![0.0, 1.0];
        let traj = integrate_she(&InitialCondition::sine(a), 1.0, &p, &cfg, 1, 0).unwrap();
        prop_assert!((traj.snapshots[0].mean() - traj.snapshots[1].mean()).abs() < 1e-12);
    }
}

#[test]
fn normalisation_by_one_dimensional_quadrature() {
    // radial form of the same identity, as an independent route
    for t in [0.1f64, 1.0, 10.0] {
        let v = integrate(
            |r| 2.0 * std::f64::consts::PI * r * heat_kernel(t, [r, 0.0]).unwrap(),
            0.0,
            20.0 * t.sqrt(),
            1e-13,
            1e-12,
        )
        .unwrap()
        .value;
        assert!((v - 1.0).abs() < 1e-8);
    }
}
