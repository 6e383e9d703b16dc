use crate::noise::grid::SpaceTimeGrid;
use crate::parallel;
use crate::rng::CounterNormals;
use crate::{Error, Result};

/// Default cap on materialised noise, in bytes.
pub const DEFAULT_BYTE_CAP: u128 = 2 << 30;

const AXIS_OFFSET: i64 = 1 << 20;

/// Lattice counter of cell `(k, iy, ix)`; spatial coordinates may be
/// negative or exceed the grid so non-periodic windows can be extended.
#[inline]
pub(crate) fn cell_counter(k: usize, iy: i64, ix: i64) -> u64 {
    ((k as u64) << 42) | (((iy + AXIS_OFFSET) as u64) << 21) | ((ix + AXIS_OFFSET) as u64)
}

/// Counter-based source of white-noise cell values on an unbounded lattice.
///
/// Values have law `N(0, 1 / (dt dx^2))` and depend only on
/// `(seed, stream, k, iy, ix)`.
#[derive(Clone)]
pub struct NoiseSource {
    pub grid: SpaceTimeGrid,
    pub seed: u64,
    pub stream: u64,
    scale: f64,
    gen: CounterNormals,
}

impl NoiseSource {
    pub fn new(grid: SpaceTimeGrid, seed: u64, stream: u64) -> Result<Self> {
        grid.validate()?;
        Ok(Self {
            grid,
            seed,
            stream,
            scale: 1.0 / (grid.dt * grid.dx * grid.dx).sqrt(),
            gen: CounterNormals::new(seed, stream),
        })
    }

    /// Standard deviation of one cell.
    pub fn cell_sd(&self) -> f64 {
        self.scale
    }

    /// Value of one cell, with periodic wrap on periodic grids.
    pub fn cell(&mut self, k: usize, iy: i64, ix: i64) -> f64 {
        let (ix, iy) = match self.grid.wrap(ix, iy) {
            Some((a, b)) => (a as i64, b as i64),
            None => (ix, iy),
        };
        self.scale * self.gen.at(cell_counter(k, iy, ix))
    }

    /// Fill one row `iy`, columns `ix0 .. ix0 + out.len()` (no wrap).
    pub fn fill_row(&mut self, k: usize, iy: i64, ix0: i64, out: &mut [f64]) {
        self.gen.fill(cell_counter(k, iy, ix0), out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// Fill slice `k` of the grid, row-major.
    pub fn fill_slice(&mut self, k: usize, out: &mut [f64]) {
        let nx = self.grid.nx;
        for (iy, row) in out.chunks_mut(nx).enumerate() {
            self.fill_row(k, iy as i64, 0, row);
        }
    }
}

/// Fully materialised white noise on a grid.
#[derive(Clone)]
pub struct WhiteNoiseField {
    pub grid: SpaceTimeGrid,
    pub seed: u64,
    pub stream: u64,
    values: Vec<f64>,
    source: NoiseSource,
}

/// Sample white noise under [`DEFAULT_BYTE_CAP`].
pub fn sample_white_noise(grid: SpaceTimeGrid, seed: u64, stream: u64) -> Result<WhiteNoiseField> {
    sample_white_noise_capped(grid, seed, stream, DEFAULT_BYTE_CAP)
}

/// Sample white noise, refusing before allocation when the field would
/// exceed `cap` bytes.
pub fn sample_white_noise_capped(grid: SpaceTimeGrid, seed: u64, stream: u64, cap: u128) -> Result<WhiteNoiseField> {
    grid.validate()?;
    if grid.bytes() > cap {
        return Err(Error::Resource(format!(
            "white noise field needs {} bytes, cap is {cap}",
            grid.bytes()
        )));
    }
    let source = NoiseSource::new(grid, seed, stream)?;
    let mut values = vec![0.0; grid.cells()];
    parallel::for_each_chunk_mut(&mut values, grid.slice_len(), |k, slice| {
        source.clone().fill_slice(k, slice);
    });
    Ok(WhiteNoiseField {
        grid,
        seed,
        stream,
        values,
        source,
    })
}

impl WhiteNoiseField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.slice_len();
        &self.values[k * n..(k + 1) * n]
    }

    /// Cell value; outside a non-periodic grid it is regenerated from the
    /// counter so the field extends consistently.
    pub fn cell(&self, k: usize, iy: i64, ix: i64) -> f64 {
        match self.grid.wrap(ix, iy) {
            Some((a, b)) => self.values[k * self.grid.slice_len() + b * self.grid.nx + a],
            None => self.source.clone().cell(k, iy, ix),
        }
    }

    /// Multiply every cell by `a` (the underlying counter stream is kept).
    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// Discrete pairing `sum f . xi dt dx^2` with a cell function.
    pub fn pair_with(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.values.len());
        let w = self.grid.dt * self.grid.dx * self.grid.dx;
        f.iter().zip(&self.values).map(|(a, b)| a * b).sum::<f64>() * w
    }

    /// Replace values (used by tests and the raw dump reader).
    pub fn from_parts(grid: SpaceTimeGrid, seed: u64, stream: u64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::domain("value count does not match grid"));
        }
        Ok(Self {
            grid,
            seed,
            stream,
            values,
            source: NoiseSource::new(grid, seed, stream)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Welford;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(0.01, 0.1, 40, 50, 50, [0.0, 0.0], true).unwrap()
    }

    #[test]
    fn deterministic() {
        let a = sample_white_noise(grid(), 3, 9).unwrap();
        let b = sample_white_noise(grid(), 3, 9).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_white_noise(grid(), 3, 10).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn random_access_matches_bulk() {
        let f = sample_white_noise(grid(), 1, 2).unwrap();
        let mut src = NoiseSource::new(grid(), 1, 2).unwrap();
        for &(k, iy, ix) in &[(0usize, 0i64, 0i64), (7, 13, 49), (39, 49, 1)] {
            assert_eq!(f.cell(k, iy, ix), src.cell(k, iy, ix));
        }
        // periodic wrap
        assert_eq!(f.cell(3, -1, 50), f.cell(3, 49, 0));
    }

    #[test]
    fn nonperiodic_extension_is_consistent() {
        let g = SpaceTimeGrid {
            periodic: false,
            ..grid()
        };
        let small = sample_white_noise(g, 5, 0).unwrap();
        let big = SpaceTimeGrid { nx: 60, ny: 60, ..g };
        let large = sample_white_noise(big, 5, 0).unwrap();
        assert_eq!(small.cell(2, 55, 57), large.cell(2, 55, 57));
    }

    #[test]
    fn variance_convention() {
        let g = SpaceTimeGrid::new(0.02, 0.2, 400, 50, 50, [0.0, 0.0], true).unwrap();
        let f = sample_white_noise(g, 11, 0).unwrap();
        let scale = g.dt * g.dx * g.dx;
        let w: Welford = f.values().iter().map(|v| v * scale.sqrt()).collect();
        let n = w.count() as f64;
        assert!(w.mean().abs() < 3.0 / n.sqrt());
        assert!((w.variance() - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn byte_cap_refuses_before_allocation() {
        let g = SpaceTimeGrid::new(0.01, 0.1, 1000, 1000, 1000, [0.0, 0.0], true).unwrap();
        assert!(matches!(
            sample_white_noise_capped(g, 0, 0, 1 << 20),
            Err(Error::Resource(_))
        ));
    }
}
