//! The Gaussian limit covariance of f-integrated fluctuations.
//!
//! For observables `a`, `b` the kernel entry is
//!
//! ```text
//! 1/(1 - ba bb) int_0^{ta ^ tb} ds int dz ua(ta - s, z) ub(tb - s, z) ga(s, z) gb(s, z),
//! g(s, z) = int f(x) I(x) rho_s(x, z) dx.
//! ```
//!
//! Test functions are finite sums of isotropic Gaussians, so `g` reduces to
//! a Gaussian factor in `z` times an average of `I` under a Gaussian law. The
//! `z` integral is then a Gaussian expectation evaluated by tensor
//! Gauss-Hermite, and only the `s` integral is adaptive.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::limitfield::coefficient::i_of_ubar;
use crate::mathkernel::quadrature::{integrate, GaussHermite};
use crate::mathkernel::{InitialCondition, TransformF};
use crate::{Error, Point, Result};

/// Relative tolerance of the time integral.
pub const KERNEL_REL_TOL: f64 = 1e-9;
/// Relative PSD tolerance: smallest eigenvalue must exceed `-PSD_TOL * trace`.
pub const PSD_TOL: f64 = 1e-8;

fn gh2() -> &'static GaussHermite {
    static GH: OnceLock<GaussHermite> = OnceLock::new();
    GH.get_or_init(|| GaussHermite::new(16))
}

/// `mass * N(center, sd^2 Id)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussComponent {
    pub mass: f64,
    pub center: Point,
    pub sd: f64,
}

impl GaussComponent {
    pub fn eval(&self, x: Point) -> f64 {
        let v = self.sd * self.sd;
        let d2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
        self.mass * (-d2 / (2.0 * v)).exp() / (2.0 * PI * v)
    }
}

/// Test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Gaussian {
        mass: f64,
        center: Point,
        sd: f64,
    },
    Mixture {
        components: Vec<GaussComponent>,
    },
    /// Node values on a square grid; each node carries mass `value dx^2`
    /// spread as a Gaussian of the cell's standard deviation `dx / sqrt 12`.
    Grid {
        origin: Point,
        dx: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
    },
}

impl TestFunction {
    /// Standard Gaussian density centred at `center`.
    pub fn standard(center: Point) -> Self {
        TestFunction::Gaussian {
            mass: 1.0,
            center,
            sd: 1.0,
        }
    }

    pub fn components(&self) -> Vec<GaussComponent> {
        match self {
            TestFunction::Gaussian { mass, center, sd } => vec![GaussComponent {
                mass: *mass,
                center: *center,
                sd: *sd,
            }],
            TestFunction::Mixture { components } => components.clone(),
            TestFunction::Grid {
                origin,
                dx,
                nx,
                ny,
                values,
            } => {
                let sd = dx / 12f64.sqrt();
                let mut out = Vec::new();
                for iy in 0..*ny {
                    for ix in 0..*nx {
                        let v = values[iy * nx + ix];
                        if v != 0.0 {
                            out.push(GaussComponent {
                                mass: v * dx * dx,
                                center: [origin[0] + ix as f64 * dx, origin[1] + iy as f64 * dx],
                                sd,
                            });
                        }
                    }
                }
                out
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TestFunction::Grid { dx, nx, ny, values, .. } = self {
            if !(*dx > 0.0) || values.len() != nx * ny {
                return Err(Error::domain("grid test function has inconsistent shape"));
            }
        }
        let comps = self.components();
        if comps.is_empty() {
            return Err(Error::domain("test function has no mass"));
        }
        for c in &comps {
            if !(c.sd > 0.0) || !c.mass.is_finite() || !c.center.iter().all(|v| v.is_finite()) {
                return Err(Error::domain(format!("invalid test function component {c:?}")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.components().iter().map(|c| c.eval(x)).sum()
    }

    /// `int f`.
    pub fn integral(&self) -> f64 {
        self.components().iter().map(|c| c.mass).sum()
    }

    /// `||f||_1` bound (exact for non-negative masses).
    pub fn l1_norm(&self) -> f64 {
        self.components().iter().map(|c| c.mass.abs()).sum()
    }

    pub fn min_sd(&self) -> f64 {
        self.components().iter().map(|c| c.sd).fold(f64::INFINITY, f64::min)
    }
}

/// One observable `U_t(f, F, beta_hat, u0)`.
#[derive(Clone, Debug)]
pub struct ObservableSpec {
    pub f: TestFunction,
    pub t: f64,
    pub transform: TransformF,
    pub beta_hat: f64,
    pub u0: InitialCondition,
}

impl ObservableSpec {
    pub fn new(f: TestFunction, t: f64, transform: TransformF, beta_hat: f64, u0: InitialCondition) -> Result<Self> {
        let s = Self {
            f,
            t,
            transform,
            beta_hat,
            u0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::domain(format!(
                "observable time must be finite and >= 0, got {}",
                self.t
            )));
        }
        if !(0.0..1.0).contains(&self.beta_hat) {
            return Err(Error::Subcritical(self.beta_hat));
        }
        self.f.validate()?;
        self.u0.validate()
    }

    pub fn label(&self) -> String {
        format!("t={}:F={}:b={}", self.t, self.transform.name(), self.beta_hat)
    }

    /// Stable 16-hex-digit hash of every field.
    pub fn spec_hash(&self) -> String {
        format!("{:016x}", crate::rng::hash_str(&format!("{self:?}")))
    }
}

/// `I` as a function of `u_bar(t, x)`.
///
/// Built-in transforms are homogeneous, `I(u) = I(1) u^{q}` with `q = p - 1`
/// (identity `q = 0`, log `q = -1`), so one quadrature serves every point.
#[derive(Clone, Debug)]
pub(crate) struct IProfile {
    transform: TransformF,
    beta_hat: f64,
    homogeneous: Option<(f64, f64)>,
}

impl IProfile {
    pub(crate) fn new(transform: &TransformF, beta_hat: f64) -> Result<Self> {
        let q = match transform {
            TransformF::Identity => Some(0.0),
            TransformF::Power(p) => Some(p - 1.0),
            TransformF::Log => Some(-1.0),
            TransformF::Custom { .. } => None,
        };
        let homogeneous = match q {
            Some(q) => Some((i_of_ubar(1.0, transform, beta_hat)?, q)),
            None => None,
        };
        Ok(Self {
            transform: transform.clone(),
            beta_hat,
            homogeneous,
        })
    }

    pub(crate) fn at(&self, u: f64) -> Result<f64> {
        match self.homogeneous {
            Some((c, q)) => Ok(if q == 0.0 { c } else { c * u.powf(q) }),
            None => i_of_ubar(u, &self.transform, self.beta_hat),
        }
    }
}

/// Precomputed view of one observable.
pub(crate) struct Prepared<'a> {
    pub spec: &'a ObservableSpec,
    pub comps: Vec<GaussComponent>,
    pub profile: IProfile,
    /// `(u_bar, I)` when `u0` is flat.
    pub flat: Option<(f64, f64)>,
}

impl<'a> Prepared<'a> {
    pub(crate) fn new(spec: &'a ObservableSpec) -> Result<Self> {
        spec.validate()?;
        let profile = IProfile::new(&spec.transform, spec.beta_hat)?;
        let flat = match spec.u0 {
            InitialCondition::Flat { value } => Some((value, profile.at(value)?)),
            _ => None,
        };
        Ok(Self {
            spec,
            comps: spec.f.components(),
            profile,
            flat,
        })
    }

    fn i_at(&self, x: Point) -> Result<f64> {
        match self.flat {
            Some((_, i)) => Ok(i),
            None => self.profile.at(self.spec.u0.u_bar(self.spec.t, x)?),
        }
    }

    fn ubar(&self, t: f64, z: Point) -> Result<f64> {
        match self.flat {
            Some((u, _)) => Ok(u),
            None => self.spec.u0.u_bar(t, z),
        }
    }

    /// `E[I(X)]` with `X ~ N(m, v Id)`.
    fn mean_i(&self, m: Point, v: f64) -> Result<f64> {
        if let Some((_, i)) = self.flat {
            return Ok(i);
        }
        if v == 0.0 {
            return self.i_at(m);
        }
        let gh = gh2();
        let s = v.sqrt();
        let mut acc = 0.0;
        for (&a, &wa) in gh.nodes.iter().zip(&gh.weights) {
            for (&b, &wb) in gh.nodes.iter().zip(&gh.weights) {
                acc += wa * wb * self.i_at([m[0] + s * a, m[1] + s * b])?;
            }
        }
        Ok(acc)
    }

    /// `g(s, z) = int f(x) I(x) rho_s(x, z) dx`.
    pub(crate) fn g(&self, s: f64, z: Point) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.comps {
            let v0 = c.sd * c.sd;
            let vt = v0 + s;
            let d2 = (z[0] - c.center[0]).powi(2) + (z[1] - c.center[1]).powi(2);
            let dens = (-d2 / (2.0 * vt)).exp() / (2.0 * PI * vt);
            let m = [(s * c.center[0] + v0 * z[0]) / vt, (s * c.center[1] + v0 * z[1]) / vt];
            acc += c.mass * dens * self.mean_i(m, v0 * s / vt)?;
        }
        Ok(acc)
    }

    /// `u_bar(s, z)` exposed for the field sampler.
    pub(crate) fn ubar_at(&self, s: f64, z: Point) -> Result<f64> {
        self.ubar(s, z)
    }
}

/// `int dz ua(ta - s, z) ub(tb - s, z) ga(s, z) gb(s, z)` for one pair of
/// components.
fn component_pair(a: &Prepared, ca: &GaussComponent, b: &Prepared, cb: &GaussComponent, s: f64) -> Result<f64> {
    let (va0, vb0) = (ca.sd * ca.sd, cb.sd * cb.sd);
    let (va, vb) = (va0 + s, vb0 + s);
    let vs = va + vb;
    let d2 = (ca.center[0] - cb.center[0]).powi(2) + (ca.center[1] - cb.center[1]).powi(2);
    let w = ca.mass * cb.mass * (-d2 / (2.0 * vs)).exp() / (2.0 * PI * vs);
    if w == 0.0 {
        return Ok(0.0);
    }
    if let (Some((ua, ia)), Some((ub, ib))) = (a.flat, b.flat) {
        return Ok(w * ua * ub * ia * ib);
    }
    let mz = [
        (vb * ca.center[0] + va * cb.center[0]) / vs,
        (vb * ca.center[1] + va * cb.center[1]) / vs,
    ];
    let sz = (va * vb / vs).sqrt();
    let ta = a.spec.t - s;
    let tb = b.spec.t - s;
    let gh = gh2();
    let mut acc = 0.0;
    for (&p, &wp) in gh.nodes.iter().zip(&gh.weights) {
        for (&q, &wq) in gh.nodes.iter().zip(&gh.weights) {
            let z = [mz[0] + sz * p, mz[1] + sz * q];
            let ma = [
                (s * ca.center[0] + va0 * z[0]) / va,
                (s * ca.center[1] + va0 * z[1]) / va,
            ];
            let mb = [
                (s * cb.center[0] + vb0 * z[0]) / vb,
                (s * cb.center[1] + vb0 * z[1]) / vb,
            ];
            let val = a.ubar(ta, z)? * b.ubar(tb, z)? * a.mean_i(ma, va0 * s / va)? * b.mean_i(mb, vb0 * s / vb)?;
            acc += wp * wq * val;
        }
    }
    Ok(w * acc)
}

/// Kernel entry with the achieved error bound of the time quadrature.
pub(crate) fn covariance_prepared(a: &Prepared, b: &Prepared) -> Result<(f64, f64)> {
    let tmax = a.spec.t.min(b.spec.t);
    if tmax == 0.0 {
        return Ok((0.0, 0.0));
    }
    let pref = 1.0 / (1.0 - a.spec.beta_hat * b.spec.beta_hat);
    let mut failure = None;
    let mut integrand = |s: f64| {
        if failure.is_some() {
            return 0.0;
        }
        let mut acc = 0.0;
        for ca in &a.comps {
            for cb in &b.comps {
                match component_pair(a, ca, b, cb, s) {
                    Ok(v) => acc += v,
                    Err(e) => {
                        failure = Some(e);
                        return 0.0;
                    }
                }
            }
        }
        acc
    };
    // scale for the absolute floor: the integrand at s = 0 times the range
    let scale = integrand(0.0).abs().max(integrand(tmax).abs()) * tmax;
    let r = integrate(&mut integrand, 0.0, tmax, 1e-15 * scale.max(1e-300), KERNEL_REL_TOL)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let value = pref * r.value;
    let error = pref * r.error;
    if error > 1e-6 * value.abs().max(1e-300) && error > 1e-12 {
        return Err(Error::numeric("kernel quadrature missed its tolerance", error));
    }
    Ok((value, error))
}

/// Limit covariance of two observables.
pub fn ew_covariance(a: &ObservableSpec, b: &ObservableSpec) -> Result<f64> {
    let pa = Prepared::new(a)?;
    let pb = Prepared::new(b)?;
    Ok(covariance_prepared(&pa, &pb)?.0)
}

/// Pairwise covariance matrix over a list of observables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovKernel {
    pub labels: Vec<String>,
    /// `ObservableSpec::spec_hash` of each entry.
    pub hashes: Vec<String>,
    /// Row-major `n x n`.
    pub matrix: Vec<f64>,
    /// Achieved absolute error bound per entry.
    pub errors: Vec<f64>,
    pub n: usize,
}

impl CovKernel {
    pub fn build(specs: &[ObservableSpec]) -> Result<Self> {
        let prepared = specs.iter().map(Prepared::new).collect::<Result<Vec<_>>>()?;
        let n = specs.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let entries = crate::parallel::try_map_indexed(pairs.len(), |k| {
            let (i, j) = pairs[k];
            covariance_prepared(&prepared[i], &prepared[j])
        })?;
        let mut matrix = vec![0.0; n * n];
        let mut errors = vec![0.0; n * n];
        for (&(i, j), &(v, e)) in pairs.iter().zip(&entries) {
            matrix[i * n + j] = v;
            matrix[j * n + i] = v;
            errors[i * n + j] = e;
            errors[j * n + i] = e;
        }
        Ok(Self {
            labels: specs.iter().map(ObservableSpec::label).collect(),
            hashes: specs.iter().map(ObservableSpec::spec_hash).collect(),
            matrix,
            errors,
            n,
        })
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::domain("covariance matrix must be square"));
        }
        let n = matrix.nrows();
        Ok(Self {
            labels: (0..n).map(|i| format!("obs{i}")).collect(),
            hashes: (0..n).map(|i| format!("obs{i}")).collect(),
            matrix: (0..n * n).map(|k| matrix[(k / n, k % n)]).collect(),
            errors: vec![0.0; n * n],
            n,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.matrix)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    /// Eigen-decomposition after checking positive semidefiniteness.
    pub fn checked_eigen(&self) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
        let eig = SymmetricEigen::new(self.to_dmatrix());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let trace = self.trace();
        if min < -PSD_TOL * trace.abs() {
            return Err(Error::KernelInvalid { min_eig: min, trace });
        }
        Ok(eig)
    }

    /// Correlation between entries `i` and `j`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) / (self.get(i, i) * self.get(j, j)).sqrt()
    }

    /// Matrix CSV: a header row of spec hashes, then one row per entry.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.hashes)?;
        for i in 0..self.n {
            out.write_record((0..self.n).map(|j| format!("{:.16e}", self.get(i, j))))?;
        }
        out.flush()?;
        Ok(())
    }
}
