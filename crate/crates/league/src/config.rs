//! Run configuration: a profile (`paper` or `desk`) supplies every default and
//! a TOML file overrides any subset of keys.

use std::path::Path;

use dis_core::matchmaking::{SamplingConfig, SamplingMode};
use dis_core::netcore::{AdamConfig, NetSpec, RndSpec};
use dis_core::rlalgos::{PpoConfig, RndConfig};
use minifootball::EnvConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{MethodVariant, PolicyVariant};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Hyperparameters as published, for reference runs on large hardware.
    Paper,
    /// Scaled batch and network for a single workstation.
    Desk,
}

/// Hidden widths of the networks every agent builds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetShape {
    pub torso: [usize; 3],
    pub head: [usize; 2],
    pub rnd_hidden: usize,
    pub rnd_embedding: usize,
}

impl NetShape {
    pub fn spec(&self, obs_dim: usize, actions: usize) -> NetSpec {
        NetSpec {
            obs_dim,
            actions,
            torso: self.torso,
            head: self.head,
            critic_obs_dim: None,
            rnd: None,
        }
    }

    pub fn rnd_spec(&self) -> RndSpec {
        RndSpec {
            hidden: self.rnd_hidden,
            embedding: self.rnd_embedding,
        }
    }
}

/// Which explorers run and how compute is split between the three kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    pub policy_explorers: Vec<PolicyVariant>,
    pub method_explorers: Vec<MethodVariant>,
    /// Episode shares of main agent, policy explorers and method explorers.
    pub shares: [f64; 3],
    /// Stacked past frames of the history-input explorer.
    pub history_frames: usize,
    /// Policy explorers restart from the main agent every this many of
    /// their own iterations; 0 disables syncing.
    pub explorer_sync_every: u64,
    /// The main agent's entropy coefficient decays to this value.
    pub main_entropy_final: f64,
    /// Updates over which that decay runs.
    pub main_entropy_anneal_updates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolsConfig {
    pub shmp_capacity: usize,
    /// Iterations between short-term pushes.
    pub publish_every: u64,
    /// Iterations between long-term snapshots.
    pub lhmp_every: u64,
    /// Iterations between screening rounds.
    pub screen_every: u64,
    /// Newest short-term entries that enter a screening round.
    pub screen_candidates: usize,
    pub games_per_pair: usize,
    /// Which pools feed the opponent sampler (all five by default).
    pub enabled: Vec<dis_core::pools::PoolKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSettings {
    pub alpha: f64,
    pub temperature: f64,
    pub exponent: f64,
    pub mode: SamplingMode,
    /// Per-game decay of pair statistics.
    pub decay: f64,
    /// Fraction of episodes played against the scripted baseline instead.
    pub builtin_opponent_rate: f64,
}

impl SamplingSettings {
    pub fn sampler(&self) -> SamplingConfig {
        SamplingConfig {
            alpha: self.alpha,
            temperature: self.temperature,
            exponent: self.exponent,
            mode: self.mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluation games pick the most likely action instead of sampling.
    pub greedy: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    /// Everything on the calling thread, in a fixed order.
    Serialized,
    /// Rollout workers on threads; results are consumed in plan order.
    Threaded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub mode: SchedulerMode,
    pub workers: usize,
    /// Capacity of the episode queue between workers and the trainer.
    pub queue_capacity: usize,
    /// Consecutive failed updates before rolling back to the last checkpoint.
    pub divergence_streak: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeagueConfig {
    pub profile: Profile,
    pub seed: u64,
    pub env: EnvConfig,
    /// Fraction of training episodes started from a key situation.
    pub scenario_mix: f64,
    pub ppo: PpoConfig,
    pub rnd: RndConfig,
    pub net: NetShape,
    pub agents: AgentsConfig,
    pub pools: PoolsConfig,
    pub sampling: SamplingSettings,
    pub evaluation: EvalConfig,
    pub schedule: ScheduleConfig,
}

impl LeagueConfig {
    /// Published hyperparameters.
    pub fn paper() -> Self {
        let ppo = PpoConfig {
            batch_size: 80_000,
            minibatch_size: 10_000,
            trajectory_length: 128,
            sample_reuse: 1.0,
            adam: AdamConfig::default(),
            ..PpoConfig::default()
        };
        Self {
            profile: Profile::Paper,
            seed: 0,
            env: EnvConfig {
                team_size: 4,
                max_steps: 3000,
                sticky_actions: true,
                ..EnvConfig::default()
            },
            scenario_mix: 0.25,
            ppo,
            rnd: RndConfig::default(),
            net: NetShape {
                torso: [256, 256, 256],
                head: [128, 128],
                rnd_hidden: 256,
                rnd_embedding: 64,
            },
            agents: AgentsConfig {
                policy_explorers: vec![
                    PolicyVariant::HistoryInput,
                    PolicyVariant::GoalClip,
                    PolicyVariant::PossessionReward,
                ],
                method_explorers: vec![MethodVariant::RndPpo, MethodVariant::Mappo],
                shares: [1.0 / 3.0; 3],
                history_frames: 2,
                explorer_sync_every: 2000,
                main_entropy_final: 0.001,
                main_entropy_anneal_updates: 100_000,
            },
            pools: PoolsConfig {
                shmp_capacity: 100,
                publish_every: 20,
                lhmp_every: 1000,
                screen_every: 200,
                screen_candidates: 10,
                games_per_pair: 6,
                enabled: crate::ablation::ALL_POOLS.to_vec(),
            },
            sampling: SamplingSettings {
                alpha: 0.6,
                temperature: 0.3,
                exponent: 1.0,
                mode: SamplingMode::Msm,
                decay: 0.99,
                builtin_opponent_rate: 0.0,
            },
            evaluation: EvalConfig { greedy: false },
            schedule: ScheduleConfig {
                mode: SchedulerMode::Threaded,
                workers: 8,
                queue_capacity: 16,
                divergence_streak: 3,
            },
        }
    }

    /// Workstation scale: small field, small batches, small network.
    pub fn desk() -> Self {
        let base = Self::paper();
        Self {
            profile: Profile::Desk,
            env: EnvConfig::default(),
            ppo: PpoConfig {
                batch_size: 2048,
                minibatch_size: 512,
                adam: AdamConfig {
                    lr: 3e-4,
                    ..AdamConfig::default()
                },
                ..base.ppo
            },
            net: NetShape {
                torso: [64, 64, 64],
                head: [32, 32],
                rnd_hidden: 64,
                rnd_embedding: 16,
            },
            agents: AgentsConfig {
                explorer_sync_every: 200,
                main_entropy_anneal_updates: 2000,
                ..base.agents
            },
            pools: PoolsConfig {
                publish_every: 5,
                lhmp_every: 50,
                screen_every: 40,
                screen_candidates: 4,
                games_per_pair: 2,
                ..base.pools
            },
            schedule: ScheduleConfig {
                workers: 2,
                queue_capacity: 4,
                ..base.schedule
            },
            ..base
        }
    }

    pub fn for_profile(p: Profile) -> Self {
        match p {
            Profile::Paper => Self::paper(),
            Profile::Desk => Self::desk(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Parses overrides on top of the profile named in the file (`desk` when
    /// absent). Unknown keys at any depth are rejected by name.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let overrides: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let profile = match overrides.get("profile") {
            None => Profile::Desk,
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|_| invalid("profile", "expected \"paper\" or \"desk\""))?,
        };
        let mut merged = toml::Table::try_from(Self::for_profile(profile)).expect("profile serializes");
        let known = merged.clone();
        merge(&mut merged, overrides.clone());
        let cfg: Self = toml::from_str(&toml::to_string(&merged).expect("merged table serializes"))
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        // defaulted core structs accept unknown keys silently; catch them here
        let mut echoed = toml::Table::try_from(&cfg).expect("config serializes");
        merge(&mut echoed, known);
        if let Some(key) = first_unknown(&overrides, &echoed, "") {
            return Err(ConfigError::UnknownKey(key));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate().map_err(|e| invalid("env", e.to_string()))?;
        self.ppo.validate().map_err(|e| invalid("ppo", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.scenario_mix) {
            return Err(invalid("scenario_mix", "must lie in [0, 1]"));
        }
        let s = self.agents.shares;
        if s.iter().any(|&x| !(x >= 0.0)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("agents.shares", "must be non-negative and sum to 1"));
        }
        for (i, (kind, n)) in [
            ("policy_explorers", self.agents.policy_explorers.len()),
            ("method_explorers", self.agents.method_explorers.len()),
        ]
        .into_iter()
        .enumerate()
        {
            if n == 0 && s[i + 1] > 0.0 {
                return Err(invalid("agents.shares", format!("share given to {kind} but none are configured")));
            }
        }
        if s[0] <= 0.0 {
            return Err(invalid("agents.shares", "the main agent needs a positive share"));
        }
        if self.agents.history_frames == 0 {
            return Err(invalid("agents.history_frames", "must be at least 1"));
        }
        let p = &self.pools;
        if p.shmp_capacity == 0 {
            return Err(invalid("pools.shmp_capacity", "must be positive"));
        }
        for (name, v) in [
            ("pools.publish_every", p.publish_every),
            ("pools.lhmp_every", p.lhmp_every),
            ("pools.screen_every", p.screen_every),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be positive"));
            }
        }
        if p.lhmp_every % p.publish_every != 0 {
            return Err(invalid("pools.lhmp_every", "must be a multiple of pools.publish_every"));
        }
        if p.games_per_pair == 0 {
            return Err(invalid("pools.games_per_pair", "must be positive"));
        }
        if p.screen_candidates == 0 {
            return Err(invalid("pools.screen_candidates", "must be positive"));
        }
        let m = &self.sampling;
        if !(0.0..=1.0).contains(&m.alpha) {
            return Err(invalid("sampling.alpha", "must lie in [0, 1]"));
        }
        if !(m.temperature > 0.0) {
            return Err(invalid("sampling.temperature", "must be positive"));
        }
        if !(m.decay > 0.0 && m.decay <= 1.0) {
            return Err(invalid("sampling.decay", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&m.builtin_opponent_rate) {
            return Err(invalid("sampling.builtin_opponent_rate", "must lie in [0, 1]"));
        }
        if self.schedule.workers == 0 || self.schedule.queue_capacity == 0 {
            return Err(invalid("schedule", "workers and queue_capacity must be positive"));
        }
        Ok(())
    }

    /// Stable digest of the whole configuration.
    pub fn hash(&self) -> String {
        digest(&self.to_toml())
    }

    /// Digest of everything that defines the main agent's training; it must
    /// not change during a run.
    pub fn main_agent_hash(&self) -> String {
        #[derive(Serialize)]
        struct MainAgent<'a> {
            env: &'a EnvConfig,
            ppo: &'a PpoConfig,
            net: &'a NetShape,
            entropy_final: f64,
            entropy_anneal_updates: u64,
        }
        let view = MainAgent {
            env: &self.env,
            ppo: &self.ppo,
            net: &self.net,
            entropy_final: self.agents.main_entropy_final,
            entropy_anneal_updates: self.agents.main_entropy_anneal_updates,
        };
        digest(&serde_json::to_string(&view).expect("main agent settings serialize"))
    }
}

fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Recursive table merge, `over` winning.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn first_unknown(given: &toml::Table, known: &toml::Table, prefix: &str) -> Option<String> {
    for (k, v) in given {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (known.get(k), v) {
            (None, _) => return Some(path),
            (Some(toml::Value::Table(kt)), toml::Value::Table(gt)) => {
                if let Some(p) = first_unknown(gt, kt, &path) {
                    return Some(p);
                }
            }
            _ => {}
        }
    }
    None
}
