use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mathkernel::sigma2;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// `X = sigma Z - sigma^2 / 2` with `sigma^2 = log 1/(1 - beta_hat^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LognormalLimit {
    pub beta_hat: f64,
    pub sigma2: f64,
}

impl LognormalLimit {
    pub fn new(beta_hat: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta_hat) {
            return Err(Error::Subcritical(beta_hat));
        }
        Ok(Self {
            beta_hat,
            sigma2: sigma2(beta_hat),
        })
    }

    /// Law with a given variance of `X` (for finite-T comparisons).
    pub fn with_variance(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(Error::domain("variance must be non-negative"));
        }
        Ok(Self {
            beta_hat: (1.0 - (-sigma2).exp()).sqrt(),
            sigma2,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Mean of `X`.
    pub fn mean(&self) -> f64 {
        -0.5 * self.sigma2
    }

    /// `E[e^{qX}] = exp(q (q - 1) sigma^2 / 2)`.
    pub fn exp_moment(&self, q: f64) -> f64 {
        (0.5 * q * (q - 1.0) * self.sigma2).exp()
    }

    /// Draw `n` copies of `X`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0x106);
        let s = self.sigma();
        (0..n)
            .map(|_| s * rng.sample::<f64, _>(StandardNormal) + self.mean())
            .collect()
    }
}
