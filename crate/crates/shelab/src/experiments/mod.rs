//! Harnesses that confront finite-`T` simulations with the limit objects.
//!
//! Each experiment has a serialisable config with defaults, a validator that
//! names the offending key, a rough resource estimate and a `run` producing a
//! [`StatReport`]. All randomness derives from the seed passed to `run`.
//!
//! Units: `t_micro` is the microscopic horizon `T = eps^-2`; polymer and
//! replica quantities live on the microscopic scale (mollifier width 1),
//! macroscopic points `x` correspond to `sqrt(T) x`.

pub mod crosscheck;
pub mod decorrelation;
pub mod ew;
pub mod l2;
pub mod limit_sample;
pub mod llt;
pub mod onepoint;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::limitfield::{ObservableSpec, TestFunction};
use crate::mathkernel::{InitialCondition, TransformF, TransformSpec, DEFAULT_DELTA};
use crate::rng::hash_str;
use crate::spde::STABILITY_RATIO;
use crate::{Error, Result};

pub use crosscheck::{CrossCase, CrosscheckConfig};
pub use decorrelation::DecorrelationConfig;
pub use ew::EwConfig;
pub use l2::L2Config;
pub use limit_sample::LimitSampleConfig;
pub use llt::LltConfig;
pub use onepoint::OnepointConfig;
pub use report::{Check, Provenance, Row, StatReport, Table, Verdict};

/// Smallest replica count for distributional tests.
pub const MIN_DISTRIBUTION_REPLICAS: usize = 100;

/// Catalog entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub keys: &'static [&'static str],
}

pub const CATALOG: [CatalogEntry; 7] = [
    CatalogEntry {
        id: "onepoint",
        description: "one-point law of u: mean, variance against the replica oracle, KS of log u",
        keys: &[
            "beta_hat",
            "t_values",
            "horizon",
            "replicas",
            "paths",
            "oracle_pairs",
            "dt",
            "dx",
        ],
    },
    CatalogEntry {
        id: "l2",
        description: "replica second moment E[Z^b Z^g] along a T ladder against 1/(1 - b g)",
        keys: &["beta_hat", "gamma_hat", "t_values", "t_macro", "pairs"],
    },
    CatalogEntry {
        id: "ew-fluct",
        description: "f-integrated fluctuations from the lattice route against the Gaussian covariance kernel",
        keys: &["observables", "t_values", "replicas", "per_eps", "work_budget"],
    },
    CatalogEntry {
        id: "llt",
        description: "point-to-point factorisation error along an ell ladder, B-term and far regime",
        keys: &["beta_hat", "big_l", "ells", "far_ells", "pairs"],
    },
    CatalogEntry {
        id: "decorrelation",
        description: "E[(Z_ell(x) - Z_ell(0))^2] along an |x| ladder: near-regime exponent and far saturation",
        keys: &["beta_hat", "t_micro", "ell", "near", "far", "pairs"],
    },
    CatalogEntry {
        id: "fk-vs-spde",
        description: "one-point mean and variance from Feynman-Kac paths and from the lattice equation",
        keys: &[
            "t_micro",
            "horizon",
            "cases",
            "fk_replicas",
            "fk_paths",
            "spde_replicas",
            "spde_per_eps",
        ],
    },
    CatalogEntry {
        id: "limit-sample",
        description: "field-level and kernel-level exact samplers of the limit statistics",
        keys: &["beta_hat", "gamma_hat", "t", "n", "dt", "dx", "kernel_draws"],
    },
];

/// Rough cost of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    /// Peak memory in bytes.
    pub bytes: f64,
    /// Single-core hours.
    pub core_hours: f64,
}

impl Resources {
    pub fn seconds(bytes: f64, secs: f64) -> Self {
        Self {
            bytes,
            core_hours: secs / 3600.0,
        }
    }

    pub fn max_with(self, o: Self) -> Self {
        Self {
            bytes: self.bytes.max(o.bytes),
            core_hours: self.core_hours + o.core_hours,
        }
    }
}

/// Config of any experiment, tagged by its catalog id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment")]
pub enum ExperimentConfig {
    #[serde(rename = "onepoint")]
    Onepoint(OnepointConfig),
    #[serde(rename = "l2")]
    L2(L2Config),
    #[serde(rename = "ew-fluct")]
    EwFluct(EwConfig),
    #[serde(rename = "llt")]
    Llt(LltConfig),
    #[serde(rename = "decorrelation")]
    Decorrelation(DecorrelationConfig),
    #[serde(rename = "fk-vs-spde")]
    FkVsSpde(CrosscheckConfig),
    #[serde(rename = "limit-sample")]
    LimitSample(LimitSampleConfig),
}

impl ExperimentConfig {
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentConfig::Onepoint(_) => "onepoint",
            ExperimentConfig::L2(_) => "l2",
            ExperimentConfig::EwFluct(_) => "ew-fluct",
            ExperimentConfig::Llt(_) => "llt",
            ExperimentConfig::Decorrelation(_) => "decorrelation",
            ExperimentConfig::FkVsSpde(_) => "fk-vs-spde",
            ExperimentConfig::LimitSample(_) => "limit-sample",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Onepoint(c) => c.validate(),
            ExperimentConfig::L2(c) => c.validate(),
            ExperimentConfig::EwFluct(c) => c.validate(),
            ExperimentConfig::Llt(c) => c.validate(),
            ExperimentConfig::Decorrelation(c) => c.validate(),
            ExperimentConfig::FkVsSpde(c) => c.validate(),
            ExperimentConfig::LimitSample(c) => c.validate(),
        }
    }

    pub fn resources(&self) -> Resources {
        match self {
            ExperimentConfig::Onepoint(c) => c.resources(),
            ExperimentConfig::L2(c) => c.resources(),
            ExperimentConfig::EwFluct(c) => c.resources(),
            ExperimentConfig::Llt(c) => c.resources(),
            ExperimentConfig::Decorrelation(c) => c.resources(),
            ExperimentConfig::FkVsSpde(c) => c.resources(),
            ExperimentConfig::LimitSample(c) => c.resources(),
        }
    }

    pub fn run(&self, seed: u64) -> Result<StatReport> {
        self.validate()?;
        match self {
            ExperimentConfig::Onepoint(c) => c.run(seed),
            ExperimentConfig::L2(c) => c.run(seed),
            ExperimentConfig::EwFluct(c) => c.run(seed),
            ExperimentConfig::Llt(c) => c.run(seed),
            ExperimentConfig::Decorrelation(c) => c.run(seed),
            ExperimentConfig::FkVsSpde(c) => c.run(seed),
            ExperimentConfig::LimitSample(c) => c.run(seed),
        }
    }
}

/// Stable short hash of a config.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let s = serde_json::to_string(cfg).expect("configs serialise");
    format!("{:016x}", hash_str(&s))
}

/// Serialised observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    pub f: TestFunction,
    pub t: f64,
    pub transform: TransformSpec,
    pub beta_hat: f64,
    pub u0: InitialCondition,
}

impl ObservableConfig {
    /// Standard Gaussian `f`, identity transform, flat data, `t = 1`.
    pub fn standard(beta_hat: f64) -> Self {
        Self {
            f: TestFunction::standard([0.0, 0.0]),
            t: 1.0,
            transform: TransformSpec::Identity,
            beta_hat,
            u0: InitialCondition::flat(),
        }
    }

    pub fn to_spec(&self) -> Result<ObservableSpec> {
        ObservableSpec::new(
            self.f.clone(),
            self.t,
            TransformF::try_from(self.transform.clone())?,
            self.beta_hat,
            self.u0.clone(),
        )
    }
}

pub(crate) fn default_delta() -> f64 {
    DEFAULT_DELTA
}

/// Shared range checks; `key` names the offending field.
pub(crate) fn check_beta(key: &str, b: f64) -> Result<()> {
    if !(0.0..1.0).contains(&b) {
        return Err(Error::config(key, format!("must lie in [0, 1), got {b}")));
    }
    Ok(())
}

pub(crate) fn check_delta(d: f64) -> Result<()> {
    if !(d > 0.0 && d < 0.01) {
        return Err(Error::config("delta", format!("must lie in (0, 1/100), got {d}")));
    }
    Ok(())
}

pub(crate) fn check_positive(key: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::config(key, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

pub(crate) fn check_ladder(key: &str, ts: &[f64], min: f64) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::config(key, "ladder is empty"));
    }
    if ts.iter().any(|&t| !(t >= min) || !t.is_finite()) {
        return Err(Error::config(
            key,
            format!("every entry must be finite and at least {min}"),
        ));
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(key, "ladder must be strictly increasing"));
    }
    Ok(())
}

/// `dt / dx^2` within the explicit-scheme bound.
pub(crate) fn check_stability(key: &str, dt: Option<f64>, dx: f64) -> Result<()> {
    let Some(dt) = dt else {
        return Ok(());
    };
    check_positive(key, dt)?;
    let ratio = dt / (dx * dx);
    if ratio > STABILITY_RATIO * (1.0 + 1e-12) {
        return Err(Error::config(
            key,
            format!("stability: dt/dx^2 = {ratio} exceeds {STABILITY_RATIO}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_count(key: &str, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::config(key, format!("must be at least {min}, got {n}")));
    }
    Ok(())
}

pub(crate) fn check_multiple(key: &str, t: f64, dt: f64) -> Result<()> {
    let n = t / dt;
    if (n - n.round()).abs() > 1e-8 * n.max(1.0) {
        return Err(Error::config(key, format!("{t} is not a multiple of the step {dt}")));
    }
    Ok(())
}
