//! Exact Gaussian sampling of the limit statistics.
//!
//! Two independent routes. [`sample_limit_statistics`] factorises the kernel
//! matrix. [`sample_v_field`] builds the stochastic convolution on a lattice
//! against members of a correlated white-noise family; its pointwise values
//! are only grid-mollified (their variance grows like `log(1/dx)`), but the
//! f-integrated statistics converge with the lattice.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::limitfield::kernel::{CovKernel, ObservableSpec, Prepared};
use crate::noise::{correlated_family, SpaceTimeGrid};
use crate::rng::{derive, stream_rng};
use crate::{Error, Result};

const SAMPLER_TAG: u64 = 0x5A_3B1E;
const FIELD_TAG: u64 = 0x00F1_E1D5;

/// `n` draws of a vector of statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct StatisticSamples {
    pub dim: usize,
    /// One row per draw.
    pub rows: Vec<Vec<f64>>,
}

impl StatisticSamples {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    /// Unbiased sample covariance matrix.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.rows.len() as f64;
        let mean: Vec<f64> = (0..self.dim)
            .map(|i| self.rows.iter().map(|r| r[i]).sum::<f64>() / n)
            .collect();
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            self.rows
                .iter()
                .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                .sum::<f64>()
                / (n - 1.0)
        })
    }

    /// Standard error of each covariance entry under Gaussianity,
    /// `sqrt((c_ij^2 + c_ii c_jj) / (n - 1))`.
    pub fn covariance_stderr(&self) -> DMatrix<f64> {
        let c = self.covariance();
        let n = self.rows.len() as f64;
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            ((c[(i, j)] * c[(i, j)] + c[(i, i)] * c[(j, j)]) / (n - 1.0)).sqrt()
        })
    }
}

/// Exact joint draws from the kernel.
///
/// Negative eigenvalues within tolerance are floored at zero. The factor is
/// the Cholesky factor of the floored matrix when it exists, else
/// `Q sqrt(Lambda)`.
pub fn sample_limit_statistics(kernel: &CovKernel, seed: u64, n: usize) -> Result<StatisticSamples> {
    let eig = kernel.checked_eigen()?;
    let lam = eig.eigenvalues.map(|l| l.max(0.0));
    let q = &eig.eigenvectors;
    let floored = q * DMatrix::from_diagonal(&lam) * q.transpose();
    let factor = match floored.clone().cholesky() {
        Some(c) => c.l(),
        None => q * DMatrix::from_diagonal(&lam.map(f64::sqrt)),
    };
    let dim = kernel.n;
    let rows = crate::parallel::map_indexed(n, |k| {
        let mut rng = stream_rng(seed, derive(&[SAMPLER_TAG, k as u64]));
        let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&factor * z).iter().copied().collect()
    });
    Ok(StatisticSamples { dim, rows })
}

/// Lattice for the field sampler.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FieldGrid {
    pub dt: f64,
    pub dx: f64,
    /// Box half-width around the origin; `None` picks one from the test
    /// functions.
    pub half_width: Option<f64>,
    /// Truncation tolerance of the correlated family.
    pub family_tol: f64,
}

impl Default for FieldGrid {
    fn default() -> Self {
        Self {
            dt: 0.1,
            dx: 0.5,
            half_width: None,
            family_tol: 1e-8,
        }
    }
}

impl FieldGrid {
    fn half_width_for(&self, specs: &[ObservableSpec]) -> f64 {
        if let Some(h) = self.half_width {
            return h;
        }
        let mut h: f64 = 0.0;
        for s in specs {
            for c in s.f.components() {
                let reach = 8.0 * (c.sd * c.sd + s.t).sqrt();
                h = h.max(c.center[0].abs() + reach).max(c.center[1].abs() + reach);
            }
        }
        h
    }
}

/// Draws of `int f_i(x) I_i(x) V_i(t_i, x) dx`, where `V_i` is the
/// stochastic convolution of `u_bar_i` against the family member for
/// `beta_hat_i`.
///
/// Each draw is the discrete pairing `sum_{k, c} g_i(t_i - s_k, y_c)
/// u_bar_i(s_k, y_c) xi(k, c) dt dx^2` at time midpoints `s_k` and cell
/// centres `y_c`, with `g_i(s, y) = int f_i I_i rho_s(., y)` in closed form.
pub fn sample_v_field(
    specs: &[ObservableSpec],
    grid: &FieldGrid,
    seed: u64,
    n_samples: usize,
) -> Result<StatisticSamples> {
    if specs.is_empty() {
        return Err(Error::domain("no observables to sample"));
    }
    if !(grid.dt > 0.0 && grid.dx > 0.0) {
        return Err(Error::config("field_grid", "dt and dx must be positive"));
    }
    let prepared = specs.iter().map(Prepared::new).collect::<Result<Vec<_>>>()?;
    for s in specs {
        let resolved = 2.0 * (s.f.min_sd().powi(2) + 0.5 * grid.dt).sqrt();
        if grid.dx > resolved {
            return Err(Error::Resolution(format!(
                "field dx = {} does not resolve a test function of width {}",
                grid.dx,
                s.f.min_sd()
            )));
        }
    }
    let tmax = specs.iter().map(|s| s.t).fold(0.0, f64::max);
    let nt = ((tmax / grid.dt).round() as usize).max(1);
    if ((nt as f64) * grid.dt - tmax).abs() > 1e-9 * tmax.max(1.0) {
        return Err(Error::config(
            "field_grid.dt",
            format!("dt = {} must divide t = {tmax}", grid.dt),
        ));
    }
    let half = grid.half_width_for(specs);
    let side = (2.0 * half / grid.dx).ceil() as usize;
    let st = SpaceTimeGrid::new(grid.dt, grid.dx, nt, side, side, [-half, -half], false)?;
    let cells = st.slice_len();
    let work = (nt * cells) as f64 * n_samples as f64;
    if work > 1e12 {
        return Err(Error::Resource(format!("field sampler needs {work:.2e} cell draws")));
    }
    // deterministic weights W_i[k][c]
    let dim = specs.len();
    let mut weights = vec![vec![0.0; nt * cells]; dim];
    for (i, p) in prepared.iter().enumerate() {
        let ti = p.spec.t;
        let wi = &mut weights[i];
        let filled = crate::parallel::try_map_indexed(nt, |k| -> Result<Vec<f64>> {
            let s = (k as f64 + 0.5) * grid.dt;
            let mut row = vec![0.0; cells];
            if s >= ti {
                return Ok(row);
            }
            for iy in 0..side {
                for ix in 0..side {
                    let y = [
                        st.origin[0] + (ix as f64 + 0.5) * grid.dx,
                        st.origin[1] + (iy as f64 + 0.5) * grid.dx,
                    ];
                    row[iy * side + ix] = p.g(ti - s, y)? * p.ubar_at(s, y)?;
                }
            }
            Ok(row)
        })?;
        for (k, row) in filled.into_iter().enumerate() {
            wi[k * cells..(k + 1) * cells].copy_from_slice(&row);
        }
    }
    let betas: Vec<f64> = specs.iter().map(|s| s.beta_hat).collect();
    let cell = grid.dt * grid.dx * grid.dx;
    let rows = crate::parallel::try_map_indexed(n_samples, |r| -> Result<Vec<f64>> {
        let family = correlated_family(&betas, grid.family_tol, st, derive(&[seed, FIELD_TAG, r as u64]))?;
        let mut out = vec![0.0; dim];
        let mut buf = vec![0.0; cells];
        for layer in 0..family.layer_count() {
            let coef: Vec<f64> = betas.iter().map(|b| b.powi(layer as i32)).collect();
            if coef.iter().all(|&c| c == 0.0) {
                continue;
            }
            for k in 0..nt {
                family.fill_layer_slice(layer, k, &mut buf);
                for i in 0..dim {
                    if coef[i] == 0.0 {
                        continue;
                    }
                    let w = &weights[i][k * cells..(k + 1) * cells];
                    let dot: f64 = w.iter().zip(&buf).map(|(a, b)| a * b).sum();
                    out[i] += coef[i] * dot * cell;
                }
            }
        }
        Ok(out)
    })?;
    Ok(StatisticSamples { dim, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limitfield::kernel::{ew_covariance, TestFunction};
    use crate::mathkernel::{InitialCondition, TransformF};
    use crate::stats::mean_stderr;

    fn spec(beta: f64) -> ObservableSpec {
        ObservableSpec::new(
            TestFunction::standard([0.0, 0.0]),
            1.0,
            TransformF::Identity,
            beta,
            InitialCondition::flat(),
        )
        .unwrap()
    }

    #[test]
    fn one_by_one_variance() {
        let k = CovKernel::from_matrix(DMatrix::from_element(1, 1, 2.5)).unwrap();
        let s = sample_limit_statistics(&k, 3, 40_000).unwrap();
        let v = s.covariance()[(0, 0)];
        let se = s.covariance_stderr()[(0, 0)];
        assert!((v - 2.5).abs() < 3.0 * se, "{v} {se}");
    }

    #[test]
    fn duplicated_spec_is_perfectly_correlated() {
        let a = spec(0.5);
        let k = CovKernel::build(&[a.clone(), a]).unwrap();
        let s = sample_limit_statistics(&k, 4, 2000).unwrap();
        let c = s.covariance();
        assert!(c[(0, 1)] / (c[(0, 0)] * c[(1, 1)]).sqrt() > 0.999);
    }

    #[test]
    fn deterministic_draws() {
        let k = CovKernel::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        assert_eq!(
            sample_limit_statistics(&k, 9, 10).unwrap(),
            sample_limit_statistics(&k, 9, 10).unwrap()
        );
    }

    #[test]
    fn field_statistic_zero_mass_is_centered() {
        let f = TestFunction::Mixture {
            components: vec![
                crate::limitfield::kernel::GaussComponent {
                    mass: 1.0,
                    center: [-1.0, 0.0],
                    sd: 1.0,
                },
                crate::limitfield::kernel::GaussComponent {
                    mass: -1.0,
                    center: [1.0, 0.0],
                    sd: 1.0,
                },
            ],
        };
        let s = ObservableSpec::new(f, 1.0, TransformF::Identity, 0.5, InitialCondition::flat()).unwrap();
        let out = sample_v_field(&[s], &FieldGrid::default(), 1, 400).unwrap();
        let (m, se) = mean_stderr(&out.column(0));
        assert!(m.abs() < 3.0 * se);
    }

    #[test]
    fn field_variance_near_kernel_small_run() {
        let s = spec(0.5);
        let want = ew_covariance(&s, &s).unwrap();
        let out = sample_v_field(&[s], &FieldGrid::default(), 2, 600).unwrap();
        let v = out.covariance()[(0, 0)];
        let se = out.covariance_stderr()[(0, 0)];
        assert!((v - want).abs() < 3.0 * se + 0.01 * want, "{v} {want} {se}");
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        let s = ObservableSpec::new(
            TestFunction::Gaussian {
                mass: 1.0,
                center: [0.0, 0.0],
                sd: 0.05,
            },
            1.0,
            TransformF::Identity,
            0.5,
            InitialCondition::flat(),
        )
        .unwrap();
        let g = FieldGrid {
            dt: 0.01,
            ..FieldGrid::default()
        };
        assert!(matches!(sample_v_field(&[s], &g, 1, 1), Err(Error::Resolution(_))));
    }
}
