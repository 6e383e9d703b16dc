use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default auxiliary exponent `delta`.
pub const DEFAULT_DELTA: f64 = 0.005;

/// Disorder scaling at mollification scale `eps`.
///
/// `T = eps^-2` is the microscopic time horizon, `beta_eps = beta_hat *
/// sqrt(4 pi / log T)` the disorder strength, and `ell_t`, `m_t`, `n_t` the
/// auxiliary scales `exp(-(log T)^{1/2 - delta})`, `exp(-(log T)^{1/2 - delta})`
/// and `exp(-(log T)^{1/2 - delta/2})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub eps: f64,
    #[serde(rename = "T")]
    pub t_micro: f64,
    pub beta_hat: f64,
    pub beta_eps: f64,
    pub delta: f64,
    pub ell_t: f64,
    pub m_t: f64,
    pub n_t: f64,
}

impl ScaleParams {
    pub fn new(eps: f64, beta_hat: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::domain(format!("eps must lie in (0, 1), got {eps}")));
        }
        if !(0.0..1.0).contains(&beta_hat) {
            return Err(Error::Subcritical(beta_hat));
        }
        if !(delta > 0.0 && delta < 0.01) {
            return Err(Error::domain(format!("delta must lie in (0, 1/100), got {delta}")));
        }
        let t_micro = eps.powi(-2);
        let log_t = t_micro.ln();
        if log_t <= 1.0 {
            return Err(Error::domain(format!("T = eps^-2 = {t_micro} must exceed e")));
        }
        Ok(Self {
            eps,
            t_micro,
            beta_hat,
            beta_eps: beta_hat * (4.0 * PI / log_t).sqrt(),
            delta,
            ell_t: (-log_t.powf(0.5 - delta)).exp(),
            m_t: (-log_t.powf(0.5 - delta)).exp(),
            n_t: (-log_t.powf(0.5 - 0.5 * delta)).exp(),
        })
    }

    /// Parameters for horizon `T` rather than `eps`.
    pub fn from_horizon(t_micro: f64, beta_hat: f64, delta: f64) -> Result<Self> {
        if !(t_micro > 1.0) {
            return Err(Error::domain(format!("T must exceed 1, got {t_micro}")));
        }
        Self::new(t_micro.powf(-0.5), beta_hat, delta)
    }

    pub fn log_t(&self) -> f64 {
        self.t_micro.ln()
    }

    /// `beta_eps` for another `beta_hat` at the same `eps`.
    pub fn beta_for(&self, beta_hat: f64) -> f64 {
        beta_hat * (4.0 * PI / self.log_t()).sqrt()
    }
}

/// `sigma^2(beta_hat) = log 1/(1 - beta_hat^2)`.
pub fn sigma2(beta_hat: f64) -> f64 {
    -(1.0 - beta_hat * beta_hat).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let p = ScaleParams::new(0.01, 0.5, 0.005).unwrap();
        assert!((p.t_micro - 1e4).abs() < 1e-8);
        assert!((p.beta_eps - 0.584_032_609_072_867).abs() < 1e-13);
        assert!((p.n_t - 0.048_896_228_804_721).abs() < 1e-13);
        assert!((p.ell_t - 0.049_719_963_594_693).abs() < 1e-13);
    }

    #[test]
    fn beta_identity() {
        let p = ScaleParams::new(0.003, 0.8, 0.005).unwrap();
        let lhs = p.beta_eps.powi(2) * p.log_t() / (4.0 * PI);
        assert!((lhs - 0.64).abs() < 1e-15);
    }

    #[test]
    fn zero_disorder() {
        assert_eq!(ScaleParams::new(0.1, 0.0, 0.005).unwrap().beta_eps, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ScaleParams::new(0.01, 1.0, 0.005), Err(Error::Subcritical(_))));
        assert!(ScaleParams::new(0.01, 0.5, 0.01).is_err());
        assert!(ScaleParams::new(0.7, 0.5, 0.005).is_err());
    }

    #[test]
    fn sigma2_half() {
        assert!((sigma2(0.5) - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    }
}
