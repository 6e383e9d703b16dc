//! Limit objects computed without asymptotics: the lognormal one-point law,
//! the coefficient `I`, the Gaussian covariance kernel and two exact samplers
//! of the limit statistics.

pub mod coefficient;
pub mod kernel;
pub mod lognormal;
pub mod sampler;

pub use coefficient::{i_coefficient, i_forms, i_of_ubar, i_power_closed_form, FORM_TOLERANCE};
pub use kernel::{ew_covariance, CovKernel, GaussComponent, ObservableSpec, TestFunction, PSD_TOL};
pub use lognormal::LognormalLimit;
pub use sampler::{sample_limit_statistics, sample_v_field, FieldGrid, StatisticSamples};
