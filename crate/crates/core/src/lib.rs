//! Core numerics and bookkeeping for population-based self-play training.
//!
//! The network and loss code is generic over the scalar type; the aliases
//! below fix it to `f64`, which is what the training loops use.

pub mod checkpoint;
pub mod elo;
pub mod matchmaking;
pub mod netcore;
pub mod pools;
pub mod rlalgos;
pub mod scalar;

pub use checkpoint::{AgentRole, Checkpoint, CheckpointId, CheckpointMeta};
pub use scalar::Scalar;

/// Default real type.
pub type Real = f64;
pub type Net = netcore::PolicyValueNet<Real>;
pub type NetGradients = netcore::Gradients<Real>;
pub type Adam = netcore::AdamState<Real>;
pub type Traj = rlalgos::Trajectory<Real>;
pub type F64Learner = rlalgos::Learner<Real>;
