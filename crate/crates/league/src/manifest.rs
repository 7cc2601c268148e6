//! Run manifest: enough state to continue a run exactly where it stopped.

use std::fs;
use std::path::Path;

use dis_core::elo::TopModelPool;
use dis_core::matchmaking::PairStats;
use dis_core::rlalgos::RunningMoments;
use dis_core::CheckpointId;
use serde::{Deserialize, Serialize};

use crate::agents::AgentKind;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub name: String,
    pub kind: AgentKind,
    pub iteration: u64,
    pub episodes: u64,
    pub samples: u64,
    pub next_seq: u64,
    pub last_checkpoint: Option<CheckpointId>,
    pub fail_streak: u32,
    pub rollbacks: u64,
    pub failed_episodes: u64,
    pub syncs: u64,
    pub pair_stats: PairStats,
    pub top_pool: TopModelPool,
    /// Working network, relative to the run directory.
    pub learner_net: String,
    /// Optimizer moments, relative to the run directory.
    pub learner_optimizer: String,
    pub updates: u64,
    pub dropped_minibatches: u64,
    pub intrinsic_stats: RunningMoments,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub run_id: String,
    pub config_hash: String,
    pub main_config_hash: String,
    pub league_iteration: u64,
    pub creation_index: u64,
    /// Pool registry file, relative to the run directory.
    pub pools: String,
    pub metrics: String,
    pub metrics_rows: u64,
    pub elo: String,
    pub elo_rows: u64,
    pub agents: Vec<AgentRecord>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        let m: Self = serde_json::from_slice(&bytes).map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))?;
        if m.version != MANIFEST_VERSION {
            anyhow::bail!(
                "{}: manifest version {} is not supported (expected {MANIFEST_VERSION})",
                path.display(),
                m.version
            );
        }
        Ok(m)
    }

    /// Atomic write (temporary file, then rename).
    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_vec_pretty(self).expect("manifest serializes"))
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
