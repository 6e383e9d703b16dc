use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

type Derivs = dyn Fn(usize, f64) -> f64 + Send + Sync;

/// Pointwise transform applied to the solution, with derivatives up to order 3.
#[derive(Clone)]
pub enum TransformF {
    Identity,
    /// `x^p` with `p` in `(0, 1]`.
    Power(f64),
    Log,
    /// User supplied `F^{(k)}(x)` for `k = 0..=3`.
    Custom {
        name: String,
        derivs: Arc<Derivs>,
    },
}

impl fmt::Debug for TransformF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformF::Identity => write!(f, "Identity"),
            TransformF::Power(p) => write!(f, "Power({p})"),
            TransformF::Log => write!(f, "Log"),
            TransformF::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl PartialEq for TransformF {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (TransformF::Identity, TransformF::Identity) | (TransformF::Log, TransformF::Log) => true,
            (TransformF::Power(a), TransformF::Power(b)) => a == b,
            (TransformF::Custom { name: a, .. }, TransformF::Custom { name: b, .. }) => a == b,
            _ => false,
        }
    }
}

/// Serialised form of the built-in transforms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    Identity,
    Power { p: f64 },
    Log,
}

impl TryFrom<TransformSpec> for TransformF {
    type Error = Error;
    fn try_from(s: TransformSpec) -> Result<Self> {
        match s {
            TransformSpec::Identity => Ok(TransformF::Identity),
            TransformSpec::Log => Ok(TransformF::Log),
            TransformSpec::Power { p } => TransformF::power(p),
        }
    }
}

impl TransformF {
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("power exponent must lie in (0, 1], got {p}")));
        }
        Ok(TransformF::Power(p))
    }

    pub fn name(&self) -> String {
        match self {
            TransformF::Identity => "identity".into(),
            TransformF::Power(p) => format!("power({p})"),
            TransformF::Log => "log".into(),
            TransformF::Custom { name, .. } => name.clone(),
        }
    }

    /// `F^{(order)}(x)` for `x > 0`.
    pub fn eval(&self, order: usize, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("transform defined on (0, inf), got x = {x}")));
        }
        if order > 3 {
            return Err(Error::domain(format!("derivative order {order} exceeds 3")));
        }
        Ok(self.eval_unchecked(order, x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, order: usize, x: f64) -> f64 {
        match self {
            TransformF::Identity => match order {
                0 => x,
                1 => 1.0,
                _ => 0.0,
            },
            TransformF::Power(p) => {
                let p = *p;
                match order {
                    0 => x.powf(p),
                    1 => p * x.powf(p - 1.0),
                    2 => p * (p - 1.0) * x.powf(p - 2.0),
                    _ => p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
                }
            }
            TransformF::Log => match order {
                0 => x.ln(),
                1 => 1.0 / x,
                2 => -1.0 / (x * x),
                _ => 2.0 / (x * x * x),
            },
            TransformF::Custom { derivs, .. } => derivs(order, x),
        }
    }

    /// Smallest `C` with `|F^{(k)}(x)| <= C (x^-k + 1)` for `k = 1, 2, 3` on a
    /// geometric grid of `[1e-6, 1e6]`.
    pub fn growth_constant(&self) -> f64 {
        let mut c = 0.0f64;
        for i in 0..=1200 {
            let x = 10f64.powf(-6.0 + 12.0 * i as f64 / 1200.0);
            for k in 1..=3 {
                let d = self.eval_unchecked(k, x).abs();
                c = c.max(d / (x.powi(-(k as i32)) + 1.0));
            }
        }
        c
    }

    /// Growth check against a given constant.
    pub fn check_growth(&self, c: f64) -> Result<()> {
        let g = self.growth_constant();
        if !(g <= c) {
            return Err(Error::domain(format!(
                "transform {} needs growth constant {g:.3e} > {c}",
                self.name()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(TransformF::Log.eval(1, 2.0).unwrap(), 0.5);
        assert_eq!(TransformF::power(0.5).unwrap().eval(1, 4.0).unwrap(), 0.25);
        assert_eq!(TransformF::Identity.eval(2, 3.0).unwrap(), 0.0);
        assert!((TransformF::Log.eval(3, 0.5).unwrap() - 16.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(TransformF::Log.eval(0, 0.0).is_err());
        assert!(TransformF::Identity.eval(1, -1.0).is_err());
        assert!(TransformF::power(0.0).is_err());
        assert!(TransformF::power(1.5).is_err());
    }

    #[test]
    fn growth_constants() {
        // log: F'' = -x^-2 fits C = 1 but F''' = 2 x^-3 needs C = 2
        assert!((TransformF::Log.growth_constant() - 2.0).abs() < 1e-12);
        for i in 0..=600 {
            let x = 10f64.powf(-6.0 + 12.0 * i as f64 / 600.0);
            assert!(TransformF::Log.eval(2, x).unwrap().abs() <= 1.0 / (x * x) + 1.0);
        }
        assert!(TransformF::power(0.5).unwrap().growth_constant() <= 1.0);
        TransformF::Identity.check_growth(1.0).unwrap();
    }

    #[test]
    fn custom_transform() {
        let f = TransformF::Custom {
            name: "sqrt-shift".into(),
            derivs: Arc::new(|k, x| match k {
                0 => (1.0 + x).sqrt(),
                1 => 0.5 / (1.0 + x).sqrt(),
                2 => -0.25 * (1.0 + x).powf(-1.5),
                _ => 0.375 * (1.0 + x).powf(-2.5),
            }),
        };
        assert!(f.check_growth(1.0).is_ok());
        assert_eq!(f.name(), "sqrt-shift");
    }
}
