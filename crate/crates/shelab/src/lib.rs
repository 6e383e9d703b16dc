//! Simulation and verification lab for the two-dimensional stochastic heat
//! equation in the intermediate-disorder regime.
//!
//! The crate is organised bottom-up:
//!
//! * [`mathkernel`]: heat kernels, the mollifier and its autocorrelation `V`,
//!   initial conditions, the transform class and the disorder scaling.
//! * [`noise`]: counter-based space-time white noise, spatial mollification
//!   and the correlated family used by the limit-field sampler.
//! * [`polymer`]: Feynman-Kac path estimators and the noise-free replica
//!   oracles for second moments.
//! * [`spde`]: an explicit lattice integrator for the regularised equation.
//! * [`limitfield`]: the lognormal one-point law, the Edwards-Wilkinson
//!   covariance kernel and exact Gaussian samplers.
//! * [`experiments`]: harnesses that confront simulations with the limits.
//!
//! Data parallelism goes through [`parallel`]; building without the default
//! `parallel` feature gives a sequential build with identical output.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod limitfield;
pub mod mathkernel;
pub mod noise;
pub mod parallel;
pub mod polymer;
pub mod rng;
pub mod spde;
pub mod stats;

pub use error::{Error, Result};

/// A point of the plane.
pub type Point = [f64; 2];
