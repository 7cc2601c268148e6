//! Two-team gridworld football.
//!
//! Each team has a keeper and a few outfielders on a small grid. Actions
//! are discrete, rewards are shaped from structured step events, and
//! episodes start either from a kickoff or from a key-situation scenario.
//! Every observation and action is expressed in the acting team's
//! coordinates, where the own goal sits at x = 0.

pub mod actions;
pub mod audit;
pub mod config;
pub mod geometry;
pub mod observation;
pub mod replay;
pub mod rewards;
pub mod rules;
pub mod scripted;
pub mod state;
pub mod step;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use actions::{action_count, Action};
pub use config::{EnvConfig, Region, RewardConfig, ScenarioSpec};
pub use geometry::{Cell, Dir, Field};
pub use observation::{encode_global, encode_observation, HistoryStack};
pub use rewards::compute_rewards;
pub use rules::legal_action_mask;
pub use scripted::scripted_action;
pub use state::{reset_match, reset_scenario, BallState, GameMode, MatchState, PlayerState, Team};
pub use step::{controlled_players, step, Event, StepResult};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expected {expected} actions, got {found}")]
    ActionCount { expected: usize, found: usize },
    #[error("action index {index} outside 0..{count}")]
    ActionIndex { index: usize, count: usize },
    #[error("episode already finished")]
    Finished,
    #[error("replay i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("replay record: {0}")]
    Json(#[from] serde_json::Error),
}

/// A match plus its random stream.
#[derive(Clone, Debug)]
pub struct Env {
    pub cfg: EnvConfig,
    pub state: MatchState,
    rng: ChaCha8Rng,
}

impl Env {
    /// New environment at kickoff.
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = reset_match(&cfg, &mut rng)?;
        Ok(Self { cfg, state, rng })
    }

    /// Restarts from kickoff, or from `scenario` when given.
    pub fn reset(&mut self, scenario: Option<&ScenarioSpec>) -> Result<(), EnvError> {
        self.state = match scenario {
            Some(spec) => reset_scenario(&self.cfg, spec, &mut self.rng)?,
            None => reset_match(&self.cfg, &mut self.rng)?,
        };
        Ok(())
    }

    pub fn controlled(&self, team: Team) -> Vec<usize> {
        controlled_players(&self.state, &self.cfg, team)
    }

    /// Base observation of every controlled player of `team`.
    pub fn observe(&self, team: Team) -> Vec<Vec<f64>> {
        self.controlled(team)
            .into_iter()
            .map(|p| encode_observation(&self.state, &self.cfg, p))
            .collect()
    }

    /// Action masks of every controlled player of `team`.
    pub fn masks(&self, team: Team) -> Vec<Vec<bool>> {
        self.controlled(team)
            .into_iter()
            .map(|p| legal_action_mask(&self.state, &self.cfg, p))
            .collect()
    }

    pub fn step(&mut self, actions: &[Vec<usize>; 2]) -> Result<StepResult, EnvError> {
        step::step(&mut self.state, &self.cfg, actions, &mut self.rng)
    }

    /// Baseline actions for `team`'s controlled players.
    pub fn scripted(&self, team: Team) -> Vec<usize> {
        scripted::scripted_actions(&self.state, &self.cfg, &self.controlled(team))
    }
}
