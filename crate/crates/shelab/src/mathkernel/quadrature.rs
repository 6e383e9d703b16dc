//! Adaptive Gauss-Kronrod integration and Gauss-Hermite rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value, error estimate and evaluation count of a quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Maximum number of bisections before giving up.
pub const MAX_INTERVALS: usize = 5000;

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive 15-point Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol*|I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
    });
    let (mut total, mut err) = (v, e);
    loop {
        if err.is_finite() && total.is_finite() && err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if heap.len() >= MAX_INTERVALS || !err.is_finite() || !total.is_finite() {
            return Err(Error::numeric(
                format!("adaptive quadrature on [{a}, {b}] did not converge"),
                err,
            ));
        }
        let s = heap.pop().expect("non-empty heap");
        let m = 0.5 * (s.a + s.b);
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        evals += 30;
        total += v1 + v2 - s.value;
        err += e1 + e2 - s.error;
        heap.push(Segment {
            a: s.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: m,
            b: s.b,
            value: v2,
            error: e2,
        });
        if heap.len() % 64 == 0 {
            // refresh running sums to keep cancellation from accumulating
            total = heap.iter().map(|s| s.value).sum();
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult { value, error, evals })
}

/// Nested adaptive quadrature over the rectangle `[ax, bx] x [ay(x), by(x)]`.
pub fn integrate_2d<F, Y>(mut f: F, (ax, bx): (f64, f64), y_range: Y, abs_tol: f64, rel_tol: f64) -> Result<QuadResult>
where
    F: FnMut(f64, f64) -> f64,
    Y: Fn(f64) -> (f64, f64),
{
    let inner_tol = abs_tol / (bx - ax).abs().max(1e-300) * 0.25;
    let mut failure: Option<Error> = None;
    let mut inner_err = 0.0f64;
    let mut evals = 0usize;
    let outer = integrate(
        |x| {
            if failure.is_some() {
                return 0.0;
            }
            let (ay, by) = y_range(x);
            match integrate(|y| f(x, y), ay, by, inner_tol, rel_tol * 0.25) {
                Ok(r) => {
                    inner_err = inner_err.max(r.error);
                    evals += r.evals;
                    r.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        ax,
        bx,
        abs_tol * 0.5,
        rel_tol * 0.5,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(QuadResult {
        value: outer.value,
        error: outer.error + inner_err * (bx - ax).abs(),
        evals,
    })
}

/// Gauss-Hermite rule for the standard normal weight: `E[g(Z)] ~ sum w_i g(x_i)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch initial nodes, polished by Newton on the orthonormal
    /// recurrence; weights are `1 / sum_k p_k(x_i)^2`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            j[(k, k - 1)] = b;
            j[(k - 1, k)] = b;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(j).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));
        let eval = |x: f64| {
            // orthonormal probabilists' Hermite values p_0..p_n and sum of squares below n
            let mut p0 = 1.0;
            let mut p1 = x;
            let mut ss = 1.0;
            if n == 1 {
                return (p1, p0, ss);
            }
            ss += p1 * p1;
            for k in 1..n {
                let p2 = (x * p1 - (k as f64).sqrt() * p0) / ((k + 1) as f64).sqrt();
                p0 = p1;
                p1 = p2;
                if k + 1 < n {
                    ss += p1 * p1;
                }
            }
            (p1, p0, ss)
        };
        let weights = nodes
            .iter_mut()
            .map(|x| {
                for _ in 0..3 {
                    let (pn, pn1, _) = eval(*x);
                    let d = (n as f64).sqrt() * pn1;
                    if d != 0.0 {
                        *x -= pn / d;
                    }
                }
                1.0 / eval(*x).2
            })
            .collect();
        Self { nodes, weights }
    }

    /// `E[g(Z)]` for standard normal `Z`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// Shared 64-node rule.
pub fn gauss_hermite_64() -> &'static GaussHermite {
    static GH: OnceLock<GaussHermite> = OnceLock::new();
    GH.get_or_init(|| GaussHermite::new(64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-12, 0.0).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn gaussian_tail_integral() {
        let r = integrate(|x| (-0.5 * x * x).exp(), -8.0, 8.0, 1e-12, 0.0).unwrap();
        assert!((r.value - (std::f64::consts::TAU).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn kink_converges() {
        let r = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, 1e-9, 0.0).unwrap();
        assert!((r.value - 4.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn nonconvergence_reports_error() {
        let r = integrate(|x: f64| 1.0 / x.abs(), -1.0, 1.0, 1e-12, 0.0);
        assert!(matches!(r, Err(Error::Numeric { .. })));
        assert!(integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-12, 0.0).is_err());
    }

    #[test]
    fn two_dimensional_disk_area() {
        let r = integrate_2d(
            |_, _| 1.0,
            (-1.0, 1.0),
            |x| {
                let h = (1.0 - x * x).max(0.0).sqrt();
                (-h, h)
            },
            1e-9,
            0.0,
        )
        .unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(64);
        assert!((gh.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!((gh.expect(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((gh.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!((gh.expect(|x| (0.5 * x).exp()) - 0.125f64.exp()).abs() < 1e-13);
        let small = GaussHermite::new(3);
        assert!((small.expect(|x| x.powi(4)) - 3.0).abs() < 1e-13);
    }
}
