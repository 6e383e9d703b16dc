use std::sync::Arc;

use crate::mathkernel::Mollifier;
use crate::noise::grid::SpaceTimeGrid;
use crate::noise::white::WhiteNoiseField;
use crate::{Error, Point, Result};

/// Sub-cell quantisation of the exact point evaluation.
const OFFSET_BINS: usize = 32;

/// How a mollified field is evaluated off the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PointEval {
    /// `sum_c phi_eps(x - y_c) xi_c dx^2` over the cells near `x`, with `x`
    /// rounded to 1/32 of a cell.
    #[default]
    Exact,
    /// Bilinear interpolation of the node values.
    Bilinear,
}

/// Node stencil of `phi_eps`, normalised to unit mass.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub taps: Vec<(i64, i64, f64)>,
}

impl Stencil {
    pub fn new(mollifier: &Mollifier, eps: f64, dx: f64) -> Result<Self> {
        check_resolution(eps, dx)?;
        let reach = (eps * mollifier.radius() / dx).ceil() as i64;
        let mut taps = Vec::new();
        for dy in -reach..=reach {
            for dx_ in -reach..=reach {
                let w = mollifier.phi_eps(eps, [dx_ as f64 * dx, dy as f64 * dx]) * dx * dx;
                if w > 0.0 {
                    taps.push((dx_, dy, w));
                }
            }
        }
        let mass: f64 = taps.iter().map(|t| t.2).sum();
        taps.iter_mut().for_each(|t| t.2 /= mass);
        Ok(Self { taps })
    }

    /// `sum w^2`, the node variance times `dt dx^2`.
    pub fn sum_sq(&self) -> f64 {
        self.taps.iter().map(|t| t.2 * t.2).sum()
    }

    pub fn reach(&self) -> i64 {
        self.taps.iter().map(|t| t.0.abs().max(t.1.abs())).max().unwrap_or(0)
    }
}

fn check_resolution(eps: f64, dx: f64) -> Result<()> {
    if !(eps >= 2.0 * dx * (1.0 - 1e-12)) {
        return Err(Error::Resolution(format!(
            "mollifier scale eps = {eps} needs eps >= 2 dx = {}",
            2.0 * dx
        )));
    }
    Ok(())
}

/// Riemann weights of `phi_eps` for quantised sub-cell offsets.
#[derive(Clone, Debug)]
struct PointTable {
    reach: i64,
    side: usize,
    weights: Vec<f64>,
}

impl PointTable {
    fn new(mollifier: &Mollifier, eps: f64, dx: f64) -> Self {
        let reach = (eps * mollifier.radius() / dx).ceil() as i64;
        let side = (2 * reach + 2) as usize;
        let q = OFFSET_BINS;
        let mut weights = vec![0.0; q * q * side * side];
        for qy in 0..q {
            for qx in 0..q {
                let fx = qx as f64 / q as f64;
                let fy = qy as f64 / q as f64;
                let base = (qy * q + qx) * side * side;
                for b in 0..side {
                    for a in 0..side {
                        let ox = (fx + reach as f64 - a as f64) * dx;
                        let oy = (fy + reach as f64 - b as f64) * dx;
                        weights[base + b * side + a] = mollifier.phi_eps(eps, [ox, oy]) * dx * dx;
                    }
                }
            }
        }
        Self { reach, side, weights }
    }

    /// Lower-left cell and weight block for a point in lattice units.
    #[inline]
    fn locate(&self, u: f64, w: f64) -> (i64, i64, &[f64]) {
        let q = OFFSET_BINS as f64;
        let mut i0 = u.floor();
        let mut j0 = w.floor();
        let mut qx = ((u - i0) * q).round();
        let mut qy = ((w - j0) * q).round();
        if qx >= q {
            qx = 0.0;
            i0 += 1.0;
        }
        if qy >= q {
            qy = 0.0;
            j0 += 1.0;
        }
        let n = self.side * self.side;
        let base = (qy as usize * OFFSET_BINS + qx as usize) * n;
        (
            i0 as i64 - self.reach,
            j0 as i64 - self.reach,
            &self.weights[base..base + n],
        )
    }
}

/// White noise convolved in space with `phi_eps`, slice by slice.
#[derive(Clone)]
pub struct MollifiedNoise {
    field: WhiteNoiseField,
    mollifier: Arc<Mollifier>,
    eps: f64,
    stencil: Stencil,
    nodes: Vec<f64>,
    table: PointTable,
    mode: PointEval,
}

/// Convolve every slice of `field` with `phi_eps`.
pub fn mollify_in_space(field: WhiteNoiseField, mollifier: Arc<Mollifier>, eps: f64) -> Result<MollifiedNoise> {
    let mut m = mollify_points(field, mollifier, eps)?;
    let g = m.field.grid;
    let mut nodes = vec![0.0; g.cells()];
    crate::parallel::for_each_chunk_mut(&mut nodes, g.slice_len(), |k, out| {
        convolve_slice(&m.field, &m.stencil, k, out);
    });
    m.nodes = nodes;
    Ok(m)
}

/// Like [`mollify_in_space`] but without materialising node values; exact
/// point evaluation is unaffected and [`MollifiedNoise::node`] computes on
/// demand.
pub fn mollify_points(field: WhiteNoiseField, mollifier: Arc<Mollifier>, eps: f64) -> Result<MollifiedNoise> {
    let g = field.grid;
    let stencil = Stencil::new(&mollifier, eps, g.dx)?;
    let table = PointTable::new(&mollifier, eps, g.dx);
    Ok(MollifiedNoise {
        field,
        mollifier,
        eps,
        stencil,
        nodes: Vec::new(),
        table,
        mode: PointEval::Exact,
    })
}

fn convolve_slice(field: &WhiteNoiseField, stencil: &Stencil, k: usize, out: &mut [f64]) {
    let g = field.grid;
    let r = stencil.reach();
    let interior = g.periodic || (g.nx as i64 > 2 * r && g.ny as i64 > 2 * r);
    let slice = field.slice(k);
    for iy in 0..g.ny as i64 {
        for ix in 0..g.nx as i64 {
            let inside = ix >= r && iy >= r && ix + r < g.nx as i64 && iy + r < g.ny as i64;
            let mut s = 0.0;
            if inside && interior {
                for &(dx, dy, w) in &stencil.taps {
                    s += w * slice[((iy + dy) as usize) * g.nx + (ix + dx) as usize];
                }
            } else {
                for &(dx, dy, w) in &stencil.taps {
                    s += w * field.cell(k, iy + dy, ix + dx);
                }
            }
            out[iy as usize * g.nx + ix as usize] = s;
        }
    }
}

impl MollifiedNoise {
    pub fn with_eval(mut self, mode: PointEval) -> Self {
        self.mode = mode;
        self
    }

    pub fn eval_mode(&self) -> PointEval {
        self.mode
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.field.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    pub fn base(&self) -> &WhiteNoiseField {
        &self.field
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Node values of slice `k`, row-major.
    ///
    /// # Panics
    /// When built by [`mollify_points`].
    pub fn node_slice(&self, k: usize) -> &[f64] {
        assert!(!self.nodes.is_empty(), "node values were not materialised");
        let n = self.field.grid.slice_len();
        &self.nodes[k * n..(k + 1) * n]
    }

    /// Node value, regenerated outside a non-periodic grid.
    pub fn node(&self, k: usize, iy: i64, ix: i64) -> f64 {
        let g = &self.field.grid;
        match g.wrap(ix, iy).filter(|_| !self.nodes.is_empty()) {
            Some((a, b)) => self.nodes[k * g.slice_len() + b * g.nx + a],
            None => self
                .stencil
                .taps
                .iter()
                .map(|&(dx, dy, w)| w * self.field.cell(k, iy + dy, ix + dx))
                .sum(),
        }
    }

    /// Value at time `t` and point `x` with the configured evaluation.
    pub fn value(&self, t: f64, x: Point) -> Result<f64> {
        let k = self
            .field
            .grid
            .slice_of(t)
            .ok_or_else(|| Error::domain(format!("time {t} outside noise horizon")))?;
        Ok(self.value_at_slice(k, x))
    }

    #[inline]
    pub fn value_at_slice(&self, k: usize, x: Point) -> f64 {
        match self.mode {
            PointEval::Exact => self.exact_at_slice(k, x),
            PointEval::Bilinear => self.bilinear_at_slice(k, x),
        }
    }

    /// `sum_c phi_eps(x - y_c) xi_c dx^2`.
    #[inline]
    pub fn exact_at_slice(&self, k: usize, x: Point) -> f64 {
        let g = &self.field.grid;
        let u = (x[0] - g.origin[0]) / g.dx;
        let w = (x[1] - g.origin[1]) / g.dx;
        let (ix0, iy0, weights) = self.table.locate(u, w);
        let side = self.table.side as i64;
        let fits = ix0 >= 0 && iy0 >= 0 && ix0 + side <= g.nx as i64 && iy0 + side <= g.ny as i64;
        let mut s = 0.0;
        if fits {
            let slice = self.field.slice(k);
            for b in 0..side {
                let row = &slice[(iy0 + b) as usize * g.nx + ix0 as usize..][..side as usize];
                let wr = &weights[(b * side) as usize..][..side as usize];
                s += row.iter().zip(wr).map(|(a, c)| a * c).sum::<f64>();
            }
        } else {
            for b in 0..side {
                for a in 0..side {
                    let wt = weights[(b * side + a) as usize];
                    if wt != 0.0 {
                        s += wt * self.field.cell(k, iy0 + b, ix0 + a);
                    }
                }
            }
        }
        s
    }

    /// Bilinear interpolation of node values.
    pub fn bilinear_at_slice(&self, k: usize, x: Point) -> f64 {
        let g = &self.field.grid;
        let u = (x[0] - g.origin[0]) / g.dx;
        let w = (x[1] - g.origin[1]) / g.dx;
        let i = u.floor();
        let j = w.floor();
        let a = u - i;
        let b = w - j;
        let (i, j) = (i as i64, j as i64);
        (1.0 - a) * (1.0 - b) * self.node(k, j, i)
            + a * (1.0 - b) * self.node(k, j, i + 1)
            + (1.0 - a) * b * self.node(k, j + 1, i)
            + a * b * self.node(k, j + 1, i + 1)
    }

    /// Variance of the exact point evaluation at `x`, times `dt`.
    pub fn exact_variance_dt(&self, x: Point) -> f64 {
        let g = &self.field.grid;
        let (_, _, weights) = self
            .table
            .locate((x[0] - g.origin[0]) / g.dx, (x[1] - g.origin[1]) / g.dx);
        weights.iter().map(|w| w * w).sum::<f64>() / (g.dx * g.dx)
    }
}
