//! Directed-polymer estimators.
//!
//! [`ensemble`] averages `Phi` over Brownian paths in a fixed environment
//! (quenched) or over fresh environments (annealed); [`replica`] evaluates
//! second-moment quantities without noise through the replica identity.
//! Everything is in microscopic units.

pub mod ensemble;
pub mod estimate;
pub mod pair;
pub mod path;
pub mod replica;

pub use ensemble::{
    annealed, fk_outcomes, partition_function, point_to_point_partition, restricted_partition, time_reversed_partition,
    w_martingale, Environment, FkPaths, PathOutcome,
};
pub use estimate::{
    disorder_variance, write_estimates, EstimateKind, EstimateRecord, PartitionEstimate, QuenchedValue,
    ESTIMATE_CSV_HEADER,
};
pub use pair::{CollisionWalk, Leg, Motion, Shift, StepRule};
pub use path::{path_energy, sample_path, Path, PathMode, PathSpec};
pub use replica::{
    decorrelation, llt_b_term, llt_cross_moment, llt_error, p2p_second_moment, quad_variation_density,
    replica_second_moment, second_moment_at, LltError, QuadVarMode, ReplicaOpts,
};
