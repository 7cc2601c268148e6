//! The three agent kinds and the fixed settings each one trains with.

use std::fmt;

use dis_core::netcore::{NetError, PolicyValueNet};
use dis_core::rlalgos::{Algorithm, PpoConfig};
use dis_core::{AgentRole, Net};
use minifootball::observation::{base_len, global_len, observation_len};
use minifootball::RewardConfig;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::LeagueConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyVariant {
    /// Observation extended with the previous frames.
    HistoryInput,
    /// Goal and win rewards computed from a clipped goal difference.
    GoalClip,
    /// Extra reward for every step on the ball.
    PossessionReward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodVariant {
    RndPpo,
    Mappo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "variant")]
pub enum AgentKind {
    Main,
    PolicyExplorer(PolicyVariant),
    MethodExplorer(MethodVariant),
}

impl AgentKind {
    pub fn role(self) -> AgentRole {
        match self {
            AgentKind::Main => AgentRole::Main,
            AgentKind::PolicyExplorer(_) => AgentRole::PolicyExplorer,
            AgentKind::MethodExplorer(_) => AgentRole::MethodExplorer,
        }
    }

    /// Index into the configured resource shares.
    pub fn share_group(self) -> usize {
        match self {
            AgentKind::Main => 0,
            AgentKind::PolicyExplorer(_) => 1,
            AgentKind::MethodExplorer(_) => 2,
        }
    }

    pub fn algorithm(self) -> Algorithm {
        match self {
            AgentKind::MethodExplorer(MethodVariant::RndPpo) => Algorithm::RndPpo,
            AgentKind::MethodExplorer(MethodVariant::Mappo) => Algorithm::Mappo,
            _ => Algorithm::Ppo,
        }
    }

    /// Short unique agent name, also used in checkpoint ids.
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Main => "main",
            AgentKind::PolicyExplorer(PolicyVariant::HistoryInput) => "pe_history",
            AgentKind::PolicyExplorer(PolicyVariant::GoalClip) => "pe_goal_clip",
            AgentKind::PolicyExplorer(PolicyVariant::PossessionReward) => "pe_possession",
            AgentKind::MethodExplorer(MethodVariant::RndPpo) => "me_rnd_ppo",
            AgentKind::MethodExplorer(MethodVariant::Mappo) => "me_mappo",
        }
    }

    /// Descriptive label stored in checkpoint metadata.
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Main => "main",
            AgentKind::PolicyExplorer(PolicyVariant::HistoryInput) => "policy_explorer/history_input",
            AgentKind::PolicyExplorer(PolicyVariant::GoalClip) => "policy_explorer/goal_clip",
            AgentKind::PolicyExplorer(PolicyVariant::PossessionReward) => "policy_explorer/possession_reward",
            AgentKind::MethodExplorer(MethodVariant::RndPpo) => "method_explorer/rnd_ppo",
            AgentKind::MethodExplorer(MethodVariant::Mappo) => "method_explorer/mappo",
        }
    }

    pub fn rewards(self) -> RewardConfig {
        match self {
            AgentKind::PolicyExplorer(PolicyVariant::GoalClip) => RewardConfig::goal_clipped(),
            AgentKind::PolicyExplorer(PolicyVariant::PossessionReward) => RewardConfig::possession(),
            _ => RewardConfig::default(),
        }
    }

    /// Past frames stacked into the observation.
    pub fn history_frames(self, cfg: &LeagueConfig) -> usize {
        match self {
            AgentKind::PolicyExplorer(PolicyVariant::HistoryInput) => cfg.agents.history_frames,
            _ => 0,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything fixed about one agent for the length of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentSetup {
    pub kind: AgentKind,
    pub algorithm: Algorithm,
    pub rewards: RewardConfig,
    pub history: usize,
    pub ppo: PpoConfig,
    /// Fraction of all episodes this agent should collect.
    pub share: f64,
}

impl AgentSetup {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn obs_dim(&self, cfg: &LeagueConfig) -> usize {
        observation_len(&cfg.env, self.history)
    }

    /// Fresh network of the right topology.
    pub fn build_net<R: Rng + ?Sized>(&self, cfg: &LeagueConfig, rng: &mut R) -> Result<Net, NetError> {
        let mut spec = cfg.net.spec(self.obs_dim(cfg), cfg.env.action_count());
        match self.algorithm {
            Algorithm::Mappo => spec.critic_obs_dim = Some(global_len(&cfg.env)),
            Algorithm::RndPpo => spec.rnd = Some(cfg.net.rnd_spec()),
            Algorithm::Ppo => {}
        }
        PolicyValueNet::new(&spec, rng)
    }

    /// The main agent's parameters adapted to this agent's input width.
    pub fn adopt(&self, main: &Net, cfg: &LeagueConfig) -> Result<Net, NetError> {
        let want = self.obs_dim(cfg);
        if main.obs_dim() == want {
            Ok(main.clone())
        } else {
            main.with_widened_input(want)
        }
    }
}

/// Agents of a run in a fixed order: main agent, policy explorers, method
/// explorers. Each kind's share is split evenly among its members.
pub fn roster(cfg: &LeagueConfig) -> Vec<AgentSetup> {
    let mut kinds = vec![AgentKind::Main];
    kinds.extend(cfg.agents.policy_explorers.iter().map(|&v| AgentKind::PolicyExplorer(v)));
    kinds.extend(cfg.agents.method_explorers.iter().map(|&v| AgentKind::MethodExplorer(v)));
    let counts = [1, cfg.agents.policy_explorers.len(), cfg.agents.method_explorers.len()];
    kinds
        .into_iter()
        .map(|kind| {
            let g = kind.share_group();
            let mut ppo = cfg.ppo.clone();
            if kind == AgentKind::Main {
                ppo.entropy_final = Some(cfg.agents.main_entropy_final);
                ppo.entropy_anneal_updates = cfg.agents.main_entropy_anneal_updates;
            } else {
                ppo.entropy_final = None;
            }
            AgentSetup {
                kind,
                algorithm: kind.algorithm(),
                rewards: kind.rewards(),
                history: kind.history_frames(cfg),
                ppo,
                share: cfg.agents.shares[g] / counts[g] as f64,
            }
        })
        .collect()
}

/// Stacked frames a network expects, read off its input width.
pub fn history_of(net: &Net, cfg: &LeagueConfig) -> usize {
    (net.obs_dim() / base_len(&cfg.env)).saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roster_splits_shares_and_fixes_settings() {
        let cfg = LeagueConfig::desk();
        let r = roster(&cfg);
        assert_eq!(r.len(), 6);
        let names: Vec<_> = r.iter().map(|a| a.name()).collect();
        assert_eq!(names, ["main", "pe_history", "pe_goal_clip", "pe_possession", "me_rnd_ppo", "me_mappo"]);
        assert!((r.iter().map(|a| a.share).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r[0].share - 1.0 / 3.0).abs() < 1e-12);
        assert!((r[1].share - 1.0 / 9.0).abs() < 1e-12);
        assert!((r[4].share - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(r[0].ppo.entropy_final, Some(0.001));
        assert!(r[1..].iter().all(|a| a.ppo.entropy_final.is_none()));
        assert_eq!(r[1].history, 2);
        assert_eq!(r[2].rewards.goal_clip, Some(3));
        assert!(r[3].rewards.hold_ball_enabled);
        assert_eq!(r[4].algorithm, Algorithm::RndPpo);
        assert_eq!(r[5].algorithm, Algorithm::Mappo);
    }

    #[test]
    fn nets_match_their_agent() {
        use rand::SeedableRng;
        let cfg = LeagueConfig::desk();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for a in roster(&cfg) {
            let net = a.build_net(&cfg, &mut rng).unwrap();
            assert_eq!(history_of(&net, &cfg), a.history);
            assert_eq!(net.rnd.is_some(), a.algorithm == Algorithm::RndPpo);
            assert_eq!(net.value_torso.is_some(), a.algorithm == Algorithm::Mappo);
        }
    }
}
