use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::mathkernel::TransformF;
use crate::{Error, Point, Result};

/// Values on a periodic `nx x ny` lattice `origin + (ix, iy) dx` at a time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub origin: Point,
    pub time: f64,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn new(nx: usize, ny: usize, dx: f64, origin: Point, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::domain(format!(
                "lattice of {nx}x{ny} needs {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            origin,
            time,
            values,
        })
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn node(&self, ix: usize, iy: usize) -> Point {
        [
            self.origin[0] + ix as f64 * self.dx,
            self.origin[1] + iy as f64 * self.dx,
        ]
    }

    /// Value at the node nearest to `x` (periodic).
    pub fn nearest(&self, x: Point) -> f64 {
        let w = |v: f64, n: usize| ((v.round() as i64).rem_euclid(n as i64)) as usize;
        let ix = w((x[0] - self.origin[0]) / self.dx, self.nx);
        let iy = w((x[1] - self.origin[1]) / self.dx, self.ny);
        self.at(ix, iy)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Riemann sum `sum f(x_i) g(u_i) dx^2`.
    pub fn integrate<F: Fn(Point) -> f64, G: Fn(f64) -> f64>(&self, f: F, g: G) -> f64 {
        let mut s = 0.0;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                s += f(self.node(ix, iy)) * g(self.at(ix, iy));
            }
        }
        s * self.dx * self.dx
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    fn check_positive(&self) -> Result<()> {
        if let Some(i) = self.values.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::domain(format!(
                "non-positive value {} at cell ({}, {})",
                self.values[i],
                i % self.nx,
                i / self.nx
            )));
        }
        Ok(())
    }

    /// CSV rows `x,y,value` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "value"])?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let p = self.node(ix, iy);
                out.write_record([
                    format!("{:.16e}", p[0]),
                    format!("{:.16e}", p[1]),
                    format!("{:.16e}", self.at(ix, iy)),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `h = log u` pointwise.
pub fn cole_hopf(field: &LatticeField) -> Result<LatticeField> {
    field.check_positive()?;
    Ok(field.map(f64::ln))
}

/// `F(u)` pointwise.
pub fn transform_field(field: &LatticeField, f: &TransformF) -> Result<LatticeField> {
    if !matches!(f, TransformF::Identity) {
        field.check_positive()?;
    }
    let mut out = field.clone();
    for v in out.values.iter_mut() {
        *v = f.eval(0, *v)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(values: Vec<f64>) -> LatticeField {
        LatticeField::new(2, 2, 0.5, [0.0, 0.0], 0.0, values).unwrap()
    }

    #[test]
    fn cole_hopf_roundtrip() {
        let f = field(vec![1.0, 2.5, 0.3, 7.0]);
        let h = cole_hopf(&f).unwrap();
        let back = h.map(f64::exp);
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-12 * b);
        }
        assert!(cole_hopf(&field(vec![1.0; 4]))
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn non_positive_is_reported() {
        let e = cole_hopf(&field(vec![1.0, 0.0, 1.0, 1.0])).unwrap_err();
        assert!(e.to_string().contains("(1, 0)"), "{e}");
    }

    #[test]
    fn identity_and_power_one() {
        let f = field(vec![1.0, 2.5, 0.3, 7.0]);
        assert_eq!(transform_field(&f, &TransformF::Identity).unwrap(), f);
        let p = transform_field(&f, &TransformF::power(1.0).unwrap()).unwrap();
        assert_eq!(p.values, f.values);
    }

    #[test]
    fn power_to_log_limit() {
        let f = field(vec![0.5, 1.5, 2.5, 4.0]);
        let h = cole_hopf(&f).unwrap();
        let mut last = f64::INFINITY;
        for p in [0.5, 0.1, 0.02] {
            let g = transform_field(&f, &TransformF::power(p).unwrap()).unwrap();
            let err = g
                .values
                .iter()
                .zip(&h.values)
                .map(|(a, b)| ((a - 1.0) / p - b).abs())
                .fold(0.0, f64::max);
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn nearest_wraps() {
        let f = field(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.nearest([1.0, 0.0]), 1.0);
        assert_eq!(f.nearest([0.5, 0.5]), 4.0);
    }
}
