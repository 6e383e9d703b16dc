//! Space-time white noise on lattices, spatial mollification and the
//! correlated family used by the limit-field sampler.
//!
//! Cell values have law `N(0, 1/(dt dx^2))`, so the discrete pairing
//! `sum f xi dt dx^2` has variance `sum f^2 dt dx^2`.

pub mod dump;
pub mod family;
pub mod grid;
pub mod mollified;
pub mod white;

pub use family::{correlated_family, CorrelatedNoiseFamily};
pub use grid::SpaceTimeGrid;
pub use mollified::{mollify_in_space, mollify_points, MollifiedNoise, PointEval, Stencil};
pub use white::{sample_white_noise, sample_white_noise_capped, NoiseSource, WhiteNoiseField};
