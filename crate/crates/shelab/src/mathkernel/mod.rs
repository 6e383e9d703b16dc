//! Deterministic kernel: heat kernels, mollifier algebra, initial conditions,
//! the transform class and the disorder scaling.

pub mod heat;
pub mod initial;
pub mod mollifier;
pub mod quadrature;
pub mod scale;
pub mod transform;

pub use heat::{heat_kernel, heat_kernel_between};
pub use initial::InitialCondition;
pub use mollifier::{collision_rate, Mollifier};
pub use scale::{sigma2, ScaleParams, DEFAULT_DELTA};
pub use transform::{TransformF, TransformSpec};
