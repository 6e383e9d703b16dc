use std::path::Path;

use crate::mathkernel::heat::heat_kernel_unchecked;
use crate::mathkernel::quadrature::{integrate, integrate_2d};
use crate::{Error, Point, Result};

/// Side of the tabulated `V` grid.
pub const V_GRID_N: usize = 512;
/// Samples per unit radius used for the radial autocorrelation table.
const RADIAL_SAMPLES: usize = 200;

#[derive(Clone, Debug)]
enum Profile {
    Bump,
    Table { rho: Vec<f64>, value: Vec<f64> },
}

impl Profile {
    /// Shape on the unit disk, `rho = |x| / R`.
    fn shape(&self, rho: f64) -> f64 {
        match self {
            Profile::Bump => {
                if rho < 1.0 {
                    (-1.0 / (1.0 - rho * rho)).exp()
                } else {
                    0.0
                }
            }
            Profile::Table { rho: r, value } => {
                if rho >= 1.0 {
                    return 0.0;
                }
                let k = r.partition_point(|&q| q <= rho).clamp(1, r.len() - 1);
                let w = (rho - r[k - 1]) / (r[k] - r[k - 1]);
                value[k - 1] * (1.0 - w) + value[k] * w
            }
        }
    }
}

/// Radial, compactly supported, unit-mass mollifier `phi` together with
/// its autocorrelation `V = phi * phi`.
///
/// `V` is stored twice: as a fine radial table (cubic interpolation, used
/// for accurate checks) and as a `512 x 512` grid over `[-2R, 2R]^2` with
/// bilinear lookup (used in hot loops).
#[derive(Clone, Debug)]
pub struct Mollifier {
    radius: f64,
    profile: Profile,
    norm: f64,
    hr: f64,
    v_radial: Vec<f64>,
    v_step: f64,
    v_grid: Vec<f64>,
}

impl Mollifier {
    /// `c exp(-1/(1 - |x|^2))` on the unit disk.
    pub fn bump() -> Self {
        Self::bump_with_radius(1.0)
    }

    /// Bump rescaled to support radius `radius`.
    pub fn bump_with_radius(radius: f64) -> Self {
        Self::build(radius, Profile::Bump).expect("bump profile is valid")
    }

    /// Mollifier from radial samples `(r_i, value_i)` with `r_0 = 0`; the
    /// support radius is the last sample radius and the mass is normalised.
    pub fn from_profile(r: &[f64], value: &[f64]) -> Result<Self> {
        if r.len() != value.len() || r.len() < 2 {
            return Err(Error::domain("profile needs at least two matching samples"));
        }
        if r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("profile radii must start at 0 and increase"));
        }
        if value.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain("profile values must be finite and non-negative"));
        }
        let radius = *r.last().unwrap();
        let rho = r.iter().map(|q| q / radius).collect();
        Self::build(
            radius,
            Profile::Table {
                rho,
                value: value.to_vec(),
            },
        )
    }

    /// Load a two-column text file `radius value`; `#` starts a comment.
    pub fn from_profile_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut r = Vec::new();
        let mut v = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::domain(format!("{}:{}: bad number `{s}`", path.display(), ln + 1)))
            };
            if cols.len() != 2 {
                return Err(Error::domain(format!(
                    "{}:{}: expected two columns",
                    path.display(),
                    ln + 1
                )));
            }
            r.push(parse(cols[0])?);
            v.push(parse(cols[1])?);
        }
        Self::from_profile(&r, &v)
    }

    fn build(radius: f64, profile: Profile) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!(
                "mollifier radius must be positive, got {radius}"
            )));
        }
        let m1 = integrate(|rho| rho * profile.shape(rho), 0.0, 1.0, 1e-16, 1e-14)?.value;
        if !(m1 > 0.0) {
            return Err(Error::domain("mollifier profile has zero mass"));
        }
        let norm = 1.0 / (std::f64::consts::TAU * radius * radius * m1);

        // V(k h) for k = 0..=2M as a Riemann sum on an h-lattice; for smooth
        // compactly supported phi this converges faster than any power of h.
        let m = RADIAL_SAMPLES;
        let h = radius / m as f64;
        let side = 2 * m + 1;
        let mut f = vec![0.0; side * side];
        for i in 0..side {
            for j in 0..side {
                let x = (i as f64 - m as f64) * h;
                let y = (j as f64 - m as f64) * h;
                f[i * side + j] = norm * profile.shape((x * x + y * y).sqrt() / radius);
            }
        }
        let v_radial: Vec<f64> = (0..=2 * m + 2)
            .map(|k| {
                if k >= side {
                    return 0.0;
                }
                let mut s = 0.0;
                for i in k..side {
                    let a = &f[i * side..(i + 1) * side];
                    let b = &f[(i - k) * side..(i - k + 1) * side];
                    s += a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
                }
                s * h * h
            })
            .collect();

        let mut out = Self {
            radius,
            profile,
            norm,
            hr: h,
            v_radial,
            v_step: 4.0 * radius / (V_GRID_N - 1) as f64,
            v_grid: Vec::new(),
        };
        let mut grid = vec![0.0; V_GRID_N * V_GRID_N];
        for i in 0..V_GRID_N {
            for j in 0..V_GRID_N {
                let x = -2.0 * radius + i as f64 * out.v_step;
                let y = -2.0 * radius + j as f64 * out.v_step;
                grid[i * V_GRID_N + j] = out.v_radial_at((x * x + y * y).sqrt());
            }
        }
        out.v_grid = grid;
        Ok(out)
    }

    /// Support radius of `phi`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Support radius of `V`.
    pub fn v_support_radius(&self) -> f64 {
        2.0 * self.radius
    }

    /// `phi` as a function of the radius.
    #[inline]
    pub fn phi_radial(&self, r: f64) -> f64 {
        self.norm * self.profile.shape(r / self.radius)
    }

    #[inline]
    pub fn phi(&self, x: Point) -> f64 {
        self.phi_radial((x[0] * x[0] + x[1] * x[1]).sqrt())
    }

    /// `phi_eps(x) = eps^-2 phi(x / eps)`.
    #[inline]
    pub fn phi_eps(&self, eps: f64, x: Point) -> f64 {
        self.phi([x[0] / eps, x[1] / eps]) / (eps * eps)
    }

    /// `V(0) = int phi^2 = sup V`.
    pub fn v0(&self) -> f64 {
        self.v_radial[0]
    }

    /// `V` from the radial table with cubic interpolation.
    pub fn v_radial_at(&self, r: f64) -> f64 {
        let u = r / self.hr;
        let last = 2 * RADIAL_SAMPLES;
        if u >= last as f64 {
            return 0.0;
        }
        let k = u.floor() as isize;
        let t = u - k as f64;
        let at = |i: isize| self.v_radial[i.unsigned_abs()];
        let (p0, p1, p2, p3) = (at(k - 1), at(k), at(k + 1), at(k + 2));
        // four-point Lagrange, with the even extension V(-r) = V(r) at k = 0
        let c0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let c1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let c3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        (c0 * p0 + c1 * p1 + c2 * p2 + c3 * p3).max(0.0)
    }

    /// Accurate `V(x)` from the radial table.
    pub fn v_exact(&self, x: Point) -> f64 {
        self.v_radial_at((x[0] * x[0] + x[1] * x[1]).sqrt())
    }

    /// Fast `V(x)`: bilinear lookup in the `512 x 512` grid, zero outside.
    #[inline]
    pub fn v(&self, x: Point) -> f64 {
        let lim = 2.0 * self.radius;
        if x[0].abs() >= lim || x[1].abs() >= lim {
            return 0.0;
        }
        let u = (x[0] + lim) / self.v_step;
        let w = (x[1] + lim) / self.v_step;
        let i = (u as usize).min(V_GRID_N - 2);
        let j = (w as usize).min(V_GRID_N - 2);
        let a = u - i as f64;
        let b = w - j as f64;
        let g = &self.v_grid;
        let r0 = i * V_GRID_N + j;
        let r1 = r0 + V_GRID_N;
        (1.0 - a) * ((1.0 - b) * g[r0] + b * g[r0 + 1]) + a * ((1.0 - b) * g[r1] + b * g[r1 + 1])
    }

    /// `int phi` by radial quadrature.
    pub fn phi_integral(&self) -> Result<f64> {
        let r = integrate(|q| q * self.phi_radial(q), 0.0, self.radius, 1e-13, 1e-13)?;
        Ok(std::f64::consts::TAU * r.value)
    }

    /// `int V` by radial quadrature of the radial table.
    pub fn v_integral(&self) -> Result<f64> {
        let r = integrate(|q| q * self.v_radial_at(q), 0.0, self.v_support_radius(), 1e-13, 1e-13)?;
        Ok(std::f64::consts::TAU * r.value)
    }
}

/// `r_s = sup_x int V(sqrt2 y) rho_s(x - y) dy`, maximised over a radial grid
/// of `x` inside the support of `V(sqrt2 .)`.
pub fn collision_rate(s: f64, mollifier: &Mollifier) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("collision rate needs s > 0, got {s}")));
    }
    let rv = mollifier.v_support_radius() / std::f64::consts::SQRT_2;
    let sd = s.sqrt();
    let mut best = 0.0f64;
    for k in 0..9 {
        let x0 = rv * k as f64 / 8.0;
        let clip = |c: f64| ((c - 8.0 * sd).max(-rv), (c + 8.0 * sd).min(rv));
        let (ax, bx) = clip(x0);
        let (ay, by) = clip(0.0);
        if ax >= bx || ay >= by {
            continue;
        }
        let r = integrate_2d(
            |y0, y1| {
                let sv = std::f64::consts::SQRT_2;
                mollifier.v_exact([sv * y0, sv * y1]) * heat_kernel_unchecked(s, [x0 - y0, y1])
            },
            (ax, bx),
            |_| (ay, by),
            1e-15,
            1e-9,
        )?;
        best = best.max(r.value);
    }
    Ok(best)
}
