use std::f64::consts::TAU;

use crate::{Error, Point, Result};

/// Two-dimensional heat kernel `(2 pi t)^{-1} exp(-|x|^2 / 2t)`.
pub fn heat_kernel(t: f64, x: Point) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(heat_kernel_unchecked(t, x))
}

/// `rho_t(x, y) = rho_t(y - x)`.
pub fn heat_kernel_between(t: f64, x: Point, y: Point) -> Result<f64> {
    heat_kernel(t, [y[0] - x[0], y[1] - x[1]])
}

#[inline]
pub(crate) fn heat_kernel_unchecked(t: f64, x: Point) -> f64 {
    (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * t)).exp() / (TAU * t)
}
