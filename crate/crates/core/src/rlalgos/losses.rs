//! Scalar loss terms: dual-clip PPO policy objective, value regression,
//! RND advantage mixing and loss combination, MAPPO policy averaging.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Per-sample dual-clip PPO loss (already negated, so lower is better).
///
/// `Â ≥ 0`: `−min(r·Â, clip(r)·Â)`; `Â < 0`: `−max(min(r·Â, clip(r)·Â), η·Â)`.
#[inline]
pub fn dual_clip_term<T: Scalar>(ratio: T, adv: T, epsilon: T, eta: T) -> T {
    let clipped = ratio.max(T::one() - epsilon).min(T::one() + epsilon);
    let surrogate = (ratio * adv).min(clipped * adv);
    if adv < T::zero() {
        -surrogate.max(eta * adv)
    } else {
        -surrogate
    }
}

/// `d term / d ratio` for [`dual_clip_term`]; zero wherever a clip is active.
#[inline]
pub fn dual_clip_term_grad<T: Scalar>(ratio: T, adv: T, epsilon: T, eta: T) -> T {
    let clipped = ratio.max(T::one() - epsilon).min(T::one() + epsilon);
    let unclipped_wins = ratio * adv <= clipped * adv;
    let ratio_live = unclipped_wins || (ratio >= T::one() - epsilon && ratio <= T::one() + epsilon);
    if adv < T::zero() {
        let surrogate = (ratio * adv).min(clipped * adv);
        if surrogate < eta * adv {
            return T::zero();
        }
    }
    if ratio_live {
        -adv
    } else {
        T::zero()
    }
}

/// Mean dual-clip loss over a batch, ratios formed from log-probabilities.
pub fn ppo_dual_clip_policy_loss<T: Scalar>(
    new_log_probs: &[T],
    old_log_probs: &[T],
    advantages: &[T],
    epsilon: T,
    eta: T,
) -> T {
    assert!(new_log_probs.len() == old_log_probs.len() && old_log_probs.len() == advantages.len());
    if advantages.is_empty() {
        return T::zero();
    }
    let n = T::from_usize(advantages.len()).unwrap();
    new_log_probs
        .iter()
        .zip(old_log_probs)
        .zip(advantages)
        .map(|((&lp, &old), &a)| dual_clip_term((lp - old).exp(), a, epsilon, eta))
        .sum::<T>()
        / n
}

/// Mean squared error between `V(s_t)` and `G_t`.
pub fn value_loss<T: Scalar>(values_new: &[T], returns: &[T]) -> T {
    assert_eq!(values_new.len(), returns.len());
    if returns.is_empty() {
        return T::zero();
    }
    let n = T::from_usize(returns.len()).unwrap();
    values_new.iter().zip(returns).map(|(&v, &g)| (v - g) * (v - g)).sum::<T>() / n
}

/// `c_e·Â^e + c_i·Â^i`, element-wise.
pub fn rnd_combined_advantage<T: Scalar>(extrinsic: &[T], intrinsic: &[T], c_e: T, c_i: T) -> Vec<T> {
    assert_eq!(extrinsic.len(), intrinsic.len());
    extrinsic.iter().zip(intrinsic).map(|(&e, &i)| c_e * e + c_i * i).collect()
}

/// The four RND-PPO loss parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RndLossParts<T> {
    pub policy: T,
    pub value: T,
    pub intrinsic_value: T,
    pub prediction: T,
}

/// Weights applied to [`RndLossParts`], in the same order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RndLossWeights {
    pub policy: f64,
    pub value: f64,
    pub intrinsic_value: f64,
    pub prediction: f64,
}

impl Default for RndLossWeights {
    fn default() -> Self {
        Self {
            policy: 1.0,
            value: 0.5,
            intrinsic_value: 0.5,
            prediction: 1.0,
        }
    }
}

pub fn rnd_total_loss<T: Scalar>(parts: &RndLossParts<T>, w: &RndLossWeights) -> T {
    T::lit(w.policy) * parts.policy
        + T::lit(w.value) * parts.value
        + T::lit(w.intrinsic_value) * parts.intrinsic_value
        + T::lit(w.prediction) * parts.prediction
}

/// Average of the per-player policy losses.
pub fn mappo_policy_loss<T: Scalar>(per_player: &[T]) -> T {
    assert!(!per_player.is_empty(), "MAPPO needs at least one player");
    per_player.iter().copied().sum::<T>() / T::from_usize(per_player.len()).unwrap()
}
