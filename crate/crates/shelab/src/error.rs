use thiserror::Error;

/// Errors raised anywhere in the lab.
///
/// Every variant maps onto one of the process exit classes used by the
/// command-line front-end through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("subcritical violation: beta_hat = {0} must lie in [0, 1)")]
    Subcritical(f64),

    #[error("numeric error: {msg} (achieved {achieved:.3e})")]
    Numeric { msg: String, achieved: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("resource error: {0}")]
    Resource(String),

    #[error("feasibility error: {0}")]
    Feasibility(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("integration failure at step {step}: {msg}")]
    Integration { step: usize, msg: String },

    #[error(
        "positivity violation at step {step}, cell ({ix}, {iy}), value {value:.3e}; retry with dt <= {suggested_dt:.3e}"
    )]
    Positivity {
        step: usize,
        ix: usize,
        iy: usize,
        value: f64,
        suggested_dt: f64,
    },

    #[error("kernel not positive semidefinite: smallest eigenvalue {min_eig:.3e}, trace {trace:.3e}")]
    KernelInvalid { min_eig: f64, trace: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn numeric(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numeric {
            msg: msg.into(),
            achieved,
        }
    }

    /// Exit code class: 2 config, 3 numeric, 4 resource.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Resolution(_) | Error::Subcritical(_) => 2,
            Error::Resource(_) | Error::Io(_) => 4,
            _ => 3,
        }
    }
}
