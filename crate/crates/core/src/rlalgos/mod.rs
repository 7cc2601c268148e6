//! Training algorithms as pure loss and advantage computations plus the
//! optimizer pass: dual-clip PPO, RND-PPO and MAPPO.

pub mod gae;
pub mod losses;
pub mod train;
pub mod trajectory;

pub use gae::{compute_gae, standardize};
pub use losses::{
    dual_clip_term, dual_clip_term_grad, mappo_policy_loss, ppo_dual_clip_policy_loss, rnd_combined_advantage,
    rnd_total_loss, value_loss, RndLossParts, RndLossWeights,
};
pub use train::{
    minibatch_loss, prepare_batch, Algorithm, Learner, LossBreakdown, LossSettings, PpoConfig, RndConfig,
    RunningMoments, Sample, TrainError, TrainReport,
};
pub use trajectory::Trajectory;

use crate::netcore::rnd_error;
use crate::netcore::{Mlp, NetError};
use crate::scalar::Scalar;

/// Intrinsic reward of an observation: mean squared gap between the
/// predictor and the frozen target embeddings.
pub fn rnd_intrinsic_reward<T: Scalar>(predictor: &Mlp<T>, target: &Mlp<T>, obs: &[T]) -> Result<T, NetError> {
    rnd_error(predictor, target, obs)
}
