use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// Largest per-axis extent; lattice coordinates are packed into 21 bits.
pub const MAX_AXIS: usize = 1 << 19;
/// Largest number of time slices; slice indices are packed into 22 bits.
pub const MAX_SLICES: usize = 1 << 22;

/// Space-time lattice `t0 + k dt`, `origin + (ix, iy) dx`.
///
/// Cell `(k, iy, ix)` covers `[t_k, t_k + dt) x` the square of side `dx`
/// centred on node `(ix, iy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub dt: f64,
    pub dx: f64,
    pub nt: usize,
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    pub t0: f64,
    pub periodic: bool,
}

impl SpaceTimeGrid {
    pub fn new(dt: f64, dx: f64, nt: usize, nx: usize, ny: usize, origin: Point, periodic: bool) -> Result<Self> {
        let g = Self {
            dt,
            dx,
            nt,
            nx,
            ny,
            origin,
            t0: 0.0,
            periodic,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square periodic grid of side `side` centred on `center`.
    pub fn periodic_square(dt: f64, dx: f64, nt: usize, side: f64, center: Point) -> Result<Self> {
        let n = (side / dx).round().max(1.0) as usize;
        let half = 0.5 * n as f64 * dx;
        Self::new(dt, dx, nt, n, n, [center[0] - half, center[1] - half], true)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dx > 0.0) || !self.dt.is_finite() || !self.dx.is_finite() {
            return Err(Error::domain(format!(
                "grid steps must be positive, got dt = {}, dx = {}",
                self.dt, self.dx
            )));
        }
        if self.nt == 0 || self.nx == 0 || self.ny == 0 {
            return Err(Error::domain("grid must contain at least one cell"));
        }
        if self.nx > MAX_AXIS || self.ny > MAX_AXIS || self.nt > MAX_SLICES {
            return Err(Error::domain(format!(
                "grid {} x {} x {} exceeds addressable extent",
                self.nt, self.ny, self.nx
            )));
        }
        Ok(())
    }

    pub fn side_x(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn side_y(&self) -> f64 {
        self.ny as f64 * self.dx
    }

    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cells(&self) -> usize {
        self.nt * self.slice_len()
    }

    /// Bytes needed to hold one `f64` per cell.
    pub fn bytes(&self) -> u128 {
        self.cells() as u128 * 8
    }

    pub fn horizon(&self) -> f64 {
        self.t0 + self.nt as f64 * self.dt
    }

    pub fn node(&self, ix: i64, iy: i64) -> Point {
        [
            self.origin[0] + ix as f64 * self.dx,
            self.origin[1] + iy as f64 * self.dx,
        ]
    }

    /// Slice containing time `t` (left-closed).
    pub fn slice_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t0) / self.dt + 1e-9).floor();
        if k < 0.0 || k >= self.nt as f64 {
            None
        } else {
            Some(k as usize)
        }
    }

    #[inline]
    pub(crate) fn wrap(&self, ix: i64, iy: i64) -> Option<(usize, usize)> {
        if self.periodic {
            Some((
                ix.rem_euclid(self.nx as i64) as usize,
                iy.rem_euclid(self.ny as i64) as usize,
            ))
        } else if ix >= 0 && iy >= 0 && (ix as usize) < self.nx && (iy as usize) < self.ny {
            Some((ix as usize, iy as usize))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate() {
        assert!(SpaceTimeGrid::new(0.0, 0.1, 1, 1, 1, [0.0, 0.0], true).is_err());
        assert!(SpaceTimeGrid::new(0.1, 0.1, 0, 1, 1, [0.0, 0.0], true).is_err());
    }

    #[test]
    fn wrap_and_slices() {
        let g = SpaceTimeGrid::new(0.5, 0.25, 4, 8, 4, [0.0, 0.0], true).unwrap();
        assert_eq!(g.wrap(-1, 4), Some((7, 0)));
        assert_eq!(g.side_x(), 2.0);
        assert_eq!(g.slice_of(0.0), Some(0));
        assert_eq!(g.slice_of(1.49), Some(2));
        assert_eq!(g.slice_of(2.0), None);
        let h = SpaceTimeGrid { periodic: false, ..g };
        assert_eq!(h.wrap(-1, 0), None);
    }

    #[test]
    fn periodic_square_is_centred() {
        let g = SpaceTimeGrid::periodic_square(0.1, 0.5, 2, 4.0, [1.0, 1.0]).unwrap();
        assert_eq!(g.nx, 8);
        assert_eq!(g.origin, [-1.0, -1.0]);
    }
}
