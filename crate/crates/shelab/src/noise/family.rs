use crate::noise::grid::SpaceTimeGrid;
use crate::noise::white::{NoiseSource, WhiteNoiseField, DEFAULT_BYTE_CAP};
use crate::rng::derive;
use crate::{Error, Result};

const FAMILY_TAG: u64 = 0xFA_311E;

/// Correlated white noises `xi_beta = sum_{n <= N} beta^n xi^(n)` built on
/// shared independent layers.
#[derive(Clone)]
pub struct CorrelatedNoiseFamily {
    pub betas: Vec<f64>,
    pub grid: SpaceTimeGrid,
    pub seed: u64,
    n_terms: usize,
    layers: Vec<NoiseSource>,
}

/// Smallest `N` with `beta_max^{N+1} < tol`.
pub fn truncation_order(beta_max: f64, tol: f64) -> usize {
    if beta_max == 0.0 {
        return 0;
    }
    let mut n = 0usize;
    let mut p = beta_max;
    while p >= tol {
        p *= beta_max;
        n += 1;
    }
    n
}

/// Build the family for `betas` with geometric truncation below `tol`.
pub fn correlated_family(betas: &[f64], tol: f64, grid: SpaceTimeGrid, seed: u64) -> Result<CorrelatedNoiseFamily> {
    if betas.is_empty() {
        return Err(Error::domain("correlated family needs at least one beta"));
    }
    if let Some(&b) = betas.iter().find(|b| !(0.0..1.0).contains(*b)) {
        return Err(Error::domain(format!("family member beta = {b} must lie in [0, 1)")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::domain(format!(
            "truncation tolerance must lie in (0, 1), got {tol}"
        )));
    }
    let beta_max = betas.iter().copied().fold(0.0, f64::max);
    let n_terms = truncation_order(beta_max, tol);
    let layers = (0..=n_terms)
        .map(|n| NoiseSource::new(grid, seed, derive(&[FAMILY_TAG, n as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelatedNoiseFamily {
        betas: betas.to_vec(),
        grid,
        seed,
        n_terms,
        layers,
    })
}

impl CorrelatedNoiseFamily {
    /// Truncation order `N`; layers are `xi^(0) .. xi^(N)`.
    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Truncated covariance density `sum_{n <= N} (beta gamma)^n`.
    pub fn covariance_density(&self, beta: f64, gamma: f64) -> f64 {
        (0..=self.n_terms).map(|n| (beta * gamma).powi(n as i32)).sum()
    }

    /// Slice `k` of layer `n`.
    pub fn fill_layer_slice(&self, n: usize, k: usize, out: &mut [f64]) {
        self.layers[n].clone().fill_slice(k, out);
    }

    /// Slice `k` of `xi_beta`.
    pub fn fill_member_slice(&self, beta: f64, k: usize, out: &mut [f64]) {
        let mut buf = vec![0.0; out.len()];
        out.iter_mut().for_each(|v| *v = 0.0);
        for n in 0..=self.n_terms {
            let c = beta.powi(n as i32);
            if c == 0.0 {
                continue;
            }
            self.fill_layer_slice(n, k, &mut buf);
            out.iter_mut().zip(&buf).for_each(|(o, b)| *o += c * b);
        }
    }

    /// Materialise `xi_beta` on the whole grid.
    pub fn member(&self, beta: f64) -> Result<WhiteNoiseField> {
        if self.grid.bytes() > DEFAULT_BYTE_CAP {
            return Err(Error::Resource(format!(
                "family member needs {} bytes, cap is {DEFAULT_BYTE_CAP}",
                self.grid.bytes()
            )));
        }
        let n = self.grid.slice_len();
        let mut values = vec![0.0; self.grid.cells()];
        crate::parallel::for_each_chunk_mut(&mut values, n, |k, out| self.fill_member_slice(beta, k, out));
        WhiteNoiseField::from_parts(self.grid, self.seed, derive(&[FAMILY_TAG, beta.to_bits()]), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::white::sample_white_noise;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(0.1, 0.5, 8, 8, 8, [0.0, 0.0], true).unwrap()
    }

    #[test]
    fn truncation_for_half() {
        // 0.5^26 > 1e-8 > 0.5^27
        let f = correlated_family(&[0.5], 1e-8, grid(), 1).unwrap();
        assert_eq!(f.n_terms(), 26);
        assert_eq!(f.layer_count(), 27);
        assert!(0.5f64.powi(f.n_terms() as i32 + 1) < 1e-8);
        assert!(0.5f64.powi(f.n_terms() as i32) >= 1e-8);
    }

    #[test]
    fn zero_member_is_first_layer() {
        let f = correlated_family(&[0.0], 1e-8, grid(), 3).unwrap();
        assert_eq!(f.n_terms(), 0);
        let m = f.member(0.0).unwrap();
        let l0 = sample_white_noise(grid(), 3, derive(&[FAMILY_TAG, 0])).unwrap();
        assert_eq!(m.values(), l0.values());
    }

    #[test]
    fn rejects_supercritical() {
        assert!(correlated_family(&[0.3, 1.0], 1e-8, grid(), 0).is_err());
    }

    #[test]
    fn truncated_density_close_to_geometric() {
        let f = correlated_family(&[0.5, 0.7], 1e-10, grid(), 0).unwrap();
        assert!((f.covariance_density(0.5, 0.7) - 1.0 / (1.0 - 0.35)).abs() < 1e-9);
    }
}
