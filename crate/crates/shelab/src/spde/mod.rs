//! Lattice integrator for the regularised stochastic heat equation and
//! pointwise transforms of its solution.

pub mod integrator;
pub mod lattice;

pub use integrator::{integrate_she, IntegratorConfig, Trajectory, DEFAULT_WORK_BUDGET, STABILITY_RATIO};
pub use lattice::{cole_hopf, transform_field, LatticeField};
