use serde::{Deserialize, Serialize};

use crate::mathkernel::heat::heat_kernel_unchecked;
use crate::mathkernel::quadrature::integrate_2d;
use crate::{Error, Point, Result};

/// Absolute tolerance for the heat-semigroup quadrature.
pub const UBAR_TOL: f64 = 1e-8;

/// Initial condition bounded away from zero and infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `u0 = value`.
    Flat { value: f64 },
    /// `u0(y) = base + amplitude sin(k . y + phase)`.
    Sine {
        base: f64,
        amplitude: f64,
        wavevector: Point,
        phase: f64,
    },
    /// `u0(y) = base + amplitude exp(-|y - center|^2 / (2 width^2))`.
    GaussianBump {
        base: f64,
        amplitude: f64,
        center: Point,
        width: f64,
    },
    /// Bilinear interpolation of node values, constant extension outside.
    Grid {
        origin: Point,
        dx: f64,
        nx: usize,
        ny: usize,
        /// Row-major, `values[iy * nx + ix]`.
        values: Vec<f64>,
    },
}

impl InitialCondition {
    pub fn flat() -> Self {
        InitialCondition::Flat { value: 1.0 }
    }

    /// `1 + amplitude sin(y_1)`.
    pub fn sine(amplitude: f64) -> Self {
        InitialCondition::Sine {
            base: 1.0,
            amplitude,
            wavevector: [1.0, 0.0],
            phase: 0.0,
        }
    }

    /// Check parameters and the bounds `0 < lower <= upper < inf`.
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Grid { dx, nx, ny, values, .. } => {
                if !(*dx > 0.0) || *nx < 2 || *ny < 2 || values.len() != nx * ny {
                    return Err(Error::domain("grid initial condition has inconsistent shape"));
                }
            }
            InitialCondition::GaussianBump { width, .. } if !(*width > 0.0) => {
                return Err(Error::domain("gaussian bump width must be positive"));
            }
            _ => {}
        }
        let (lo, hi) = (self.lower(), self.upper());
        if !(lo > 0.0) || !hi.is_finite() || lo > hi {
            return Err(Error::domain(format!(
                "initial condition must satisfy 0 < lower <= upper < inf, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Certified lower bound.
    pub fn lower(&self) -> f64 {
        match self {
            InitialCondition::Flat { value } => *value,
            InitialCondition::Sine { base, amplitude, .. } => base - amplitude.abs(),
            InitialCondition::GaussianBump { base, amplitude, .. } => base + amplitude.min(0.0),
            InitialCondition::Grid { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Certified upper bound.
    pub fn upper(&self) -> f64 {
        match self {
            InitialCondition::Flat { value } => *value,
            InitialCondition::Sine { base, amplitude, .. } => base + amplitude.abs(),
            InitialCondition::GaussianBump { base, amplitude, .. } => base + amplitude.max(0.0),
            InitialCondition::Grid { values, .. } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, InitialCondition::Flat { .. })
    }

    pub fn eval(&self, x: Point) -> f64 {
        match self {
            InitialCondition::Flat { value } => *value,
            InitialCondition::Sine {
                base,
                amplitude,
                wavevector: k,
                phase,
            } => base + amplitude * (k[0] * x[0] + k[1] * x[1] + phase).sin(),
            InitialCondition::GaussianBump {
                base,
                amplitude,
                center: c,
                width,
            } => {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                base + amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            InitialCondition::Grid {
                origin,
                dx,
                nx,
                ny,
                values,
            } => {
                let u = ((x[0] - origin[0]) / dx).clamp(0.0, (*nx - 1) as f64);
                let w = ((x[1] - origin[1]) / dx).clamp(0.0, (*ny - 1) as f64);
                let i = (u as usize).min(nx - 2);
                let j = (w as usize).min(ny - 2);
                let a = u - i as f64;
                let b = w - j as f64;
                let at = |ix: usize, iy: usize| values[iy * nx + ix];
                (1.0 - a) * (1.0 - b) * at(i, j)
                    + a * (1.0 - b) * at(i + 1, j)
                    + (1.0 - a) * b * at(i, j + 1)
                    + a * b * at(i + 1, j + 1)
            }
        }
    }

    /// `u_bar(t, x) = int rho_t(x, y) u0(y) dy`.
    pub fn u_bar(&self, t: f64, x: Point) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("u_bar needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(self.eval(x));
        }
        match self {
            InitialCondition::Flat { value } => Ok(*value),
            InitialCondition::Sine {
                base,
                amplitude,
                wavevector: k,
                phase,
            } => {
                let k2 = k[0] * k[0] + k[1] * k[1];
                Ok(base + amplitude * (-0.5 * k2 * t).exp() * (k[0] * x[0] + k[1] * x[1] + phase).sin())
            }
            InitialCondition::GaussianBump {
                base,
                amplitude,
                center: c,
                width,
            } => {
                let s2 = width * width + t;
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                Ok(base + amplitude * (width * width / s2) * (-d2 / (2.0 * s2)).exp())
            }
            InitialCondition::Grid { .. } => {
                let h = 8.0 * t.sqrt();
                let r = integrate_2d(
                    |y0, y1| heat_kernel_unchecked(t, [y0 - x[0], y1 - x[1]]) * self.eval([y0, y1]),
                    (x[0] - h, x[0] + h),
                    |_| (x[1] - h, x[1] + h),
                    UBAR_TOL,
                    0.0,
                )?;
                Ok(r.value.clamp(self.lower(), self.upper()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_is_invariant() {
        let u = InitialCondition::flat();
        assert_eq!(u.u_bar(3.7, [1.0, -2.0]).unwrap(), 1.0);
    }

    #[test]
    fn time_zero_is_identity() {
        let u = InitialCondition::sine(0.5);
        assert_eq!(u.u_bar(0.0, [0.4, 0.0]).unwrap(), u.eval([0.4, 0.0]));
    }

    #[test]
    fn sine_closed_form() {
        let u = InitialCondition::sine(0.5);
        let v = u.u_bar(1.0, [0.3, 0.0]).unwrap();
        let expect = 1.0 + 0.5 * (-0.5f64).exp() * 0.3f64.sin();
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn grid_quadrature_matches_closed_form() {
        let sine = InitialCondition::sine(0.5);
        let (nx, ny, dx) = (321, 161, 0.05);
        let origin = [-8.0, -4.0];
        let values = (0..ny)
            .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| sine.eval([origin[0] + ix as f64 * dx, origin[1] + iy as f64 * dx]))
            .collect();
        let grid = InitialCondition::Grid {
            origin,
            dx,
            nx,
            ny,
            values,
        };
        grid.validate().unwrap();
        let a = grid.u_bar(0.2, [0.3, 0.0]).unwrap();
        let b = sine.u_bar(0.2, [0.3, 0.0]).unwrap();
        // bilinear interpolation error of the grid, not the quadrature, dominates
        assert!((a - b).abs() < 2e-4, "{a} {b}");
    }

    #[test]
    fn gaussian_bump_mass_spreads() {
        let u = InitialCondition::GaussianBump {
            base: 1.0,
            amplitude: 2.0,
            center: [0.0, 0.0],
            width: 0.5,
        };
        let v = u.u_bar(0.75, [0.0, 0.0]).unwrap();
        assert!((v - (1.0 + 2.0 * 0.25)).abs() < 1e-15);
        assert!(v >= u.lower() && v <= u.upper());
    }

    #[test]
    fn bounds_validation() {
        assert!(InitialCondition::sine(1.5).validate().is_err());
        assert!(InitialCondition::Flat { value: 0.0 }.validate().is_err());
        assert!(InitialCondition::sine(0.5).validate().is_ok());
    }
}
