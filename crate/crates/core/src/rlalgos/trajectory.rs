use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Fixed-length rollout segment recorded by one controlled player.
///
/// Log-probabilities and values are the ones produced by the checkpoint that
/// acted, at sampling time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    /// Player slot within its team (MAPPO averages policy losses per slot).
    pub player: usize,
    pub obs: Vec<Vec<T>>,
    /// Global observations for a separated critic.
    pub critic_obs: Option<Vec<Vec<T>>>,
    /// Legal-action masks in force when acting, if masking was enabled.
    pub masks: Option<Vec<Vec<bool>>>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<T>,
    pub rewards: Vec<T>,
    pub values_old: Vec<T>,
    pub intrinsic_rewards: Option<Vec<T>>,
    pub intrinsic_values_old: Option<Vec<T>>,
    pub terminals: Vec<bool>,
    /// `V_old` of the state following the segment (0 when it ended an episode).
    pub bootstrap_value: T,
    pub bootstrap_intrinsic_value: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn empty(player: usize) -> Self {
        Self {
            player,
            obs: Vec::new(),
            critic_obs: None,
            masks: None,
            actions: Vec::new(),
            old_log_probs: Vec::new(),
            rewards: Vec::new(),
            values_old: Vec::new(),
            intrinsic_rewards: None,
            intrinsic_values_old: None,
            terminals: Vec::new(),
            bootstrap_value: T::zero(),
            bootstrap_intrinsic_value: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Every per-step sequence has the same length.
    pub fn is_consistent(&self) -> bool {
        let n = self.len();
        let opt = |v: &Option<Vec<T>>| v.as_ref().map_or(true, |v| v.len() == n);
        self.obs.len() == n
            && self.old_log_probs.len() == n
            && self.rewards.len() == n
            && self.values_old.len() == n
            && self.terminals.len() == n
            && self.critic_obs.as_ref().map_or(true, |v| v.len() == n)
            && self.masks.as_ref().map_or(true, |v| v.len() == n)
            && opt(&self.intrinsic_rewards)
            && opt(&self.intrinsic_values_old)
    }

    /// Splits into consecutive pieces of at most `len` steps; inner cut points
    /// bootstrap from the recorded `V_old` of the first step after the cut.
    pub fn split(self, len: usize) -> Vec<Trajectory<T>> {
        assert!(len > 0);
        if self.len() <= len {
            return vec![self];
        }
        let n = self.len();
        let mut out = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + len).min(n);
            let slice = |v: &Vec<T>| v[start..end].to_vec();
            let (boot, iboot) = if end == n {
                (self.bootstrap_value, self.bootstrap_intrinsic_value)
            } else {
                (
                    self.values_old[end],
                    self.intrinsic_values_old.as_ref().map_or(T::zero(), |v| v[end]),
                )
            };
            out.push(Trajectory {
                player: self.player,
                obs: self.obs[start..end].to_vec(),
                critic_obs: self.critic_obs.as_ref().map(|v| v[start..end].to_vec()),
                masks: self.masks.as_ref().map(|v| v[start..end].to_vec()),
                actions: self.actions[start..end].to_vec(),
                old_log_probs: slice(&self.old_log_probs),
                rewards: slice(&self.rewards),
                values_old: slice(&self.values_old),
                intrinsic_rewards: self.intrinsic_rewards.as_ref().map(slice),
                intrinsic_values_old: self.intrinsic_values_old.as_ref().map(slice),
                terminals: self.terminals[start..end].to_vec(),
                bootstrap_value: boot,
                bootstrap_intrinsic_value: iboot,
            });
            start = end;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(n: usize) -> Trajectory<f64> {
        let mut t = Trajectory::empty(0);
        for i in 0..n {
            t.obs.push(vec![i as f64]);
            t.actions.push(i % 3);
            t.old_log_probs.push(-1.0);
            t.rewards.push(0.0);
            t.values_old.push(i as f64);
            t.terminals.push(i + 1 == n);
        }
        t
    }

    #[test]
    fn split_bootstraps_from_next_value() {
        let parts = traj(300).split(128);
        assert_eq!(parts.iter().map(Trajectory::len).collect::<Vec<_>>(), vec![128, 128, 44]);
        assert_eq!(parts[0].bootstrap_value, 128.0);
        assert_eq!(parts[1].bootstrap_value, 256.0);
        assert!(parts.iter().all(Trajectory::is_consistent));
        assert!(parts[2].terminals[43]);
    }
}
