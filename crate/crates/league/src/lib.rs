//! Population-based self-play league for the mini football environment:
//! agents, opponent pools and sampling, scheduling, screening, evaluation,
//! ablations and run persistence.

pub mod ablation;
pub mod actor;
pub mod agents;
pub mod config;
pub mod evaluation;
pub mod league;
pub mod manifest;
pub mod metrics;
pub mod rollout;

pub use actor::{derive_seed, Actor, Selection};
pub use config::LeagueConfig;
pub use league::{Budget, League, LeagueError};
