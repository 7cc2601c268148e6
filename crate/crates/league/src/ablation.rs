//! Ablation runs: the same league, from the same start and for the same
//! budget, under different pool sets and sampling settings, followed by a
//! cross-play rating of the final main agents.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dis_core::pools::PoolKind;
use dis_core::{CheckpointId, Net};
use minifootball::EnvConfig;
use serde::{Deserialize, Serialize};

use crate::actor::{Actor, Selection};
use crate::config::LeagueConfig;
use crate::evaluation::{tournament, Tournament};
use crate::league::{Budget, League, LeagueError};

pub const ALL_POOLS: [PoolKind; 5] = [PoolKind::Shmp, PoolKind::Lhmp, PoolKind::Smp, PoolKind::Dpmp, PoolKind::Dmmp];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// All five pools.
    Full,
    /// Without the shared method-explorer pool.
    NoDmmp,
    /// Own pools only.
    NoDpmp,
    ShmpLhmp,
    ShmpOnly,
    SelfPlayOnly,
    /// Full pools, uniform opponent choice within each pool.
    Uniform,
    /// Every episode starts from kickoff.
    NoScenarios,
    /// 10% of episodes against the scripted baseline.
    Builtin,
    ActionMasks,
}

impl Arm {
    pub const ALL: [Arm; 10] = [
        Arm::Full,
        Arm::NoDmmp,
        Arm::NoDpmp,
        Arm::ShmpLhmp,
        Arm::ShmpOnly,
        Arm::SelfPlayOnly,
        Arm::Uniform,
        Arm::NoScenarios,
        Arm::Builtin,
        Arm::ActionMasks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Full => "full",
            Arm::NoDmmp => "ablation1",
            Arm::NoDpmp => "ablation2",
            Arm::ShmpLhmp => "ablation3",
            Arm::ShmpOnly => "ablation4",
            Arm::SelfPlayOnly => "ablation5",
            Arm::Uniform => "uniform",
            Arm::NoScenarios => "no_scenarios",
            Arm::Builtin => "builtin",
            Arm::ActionMasks => "masks",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn pools(self) -> Vec<PoolKind> {
        use PoolKind::*;
        match self {
            Arm::NoDmmp => vec![Shmp, Lhmp, Smp, Dpmp],
            Arm::NoDpmp => vec![Shmp, Lhmp, Smp],
            Arm::ShmpLhmp => vec![Shmp, Lhmp],
            Arm::ShmpOnly => vec![Shmp],
            Arm::SelfPlayOnly => Vec::new(),
            _ => ALL_POOLS.to_vec(),
        }
    }

    /// `base` with this arm's changes.
    pub fn apply(self, base: &LeagueConfig) -> LeagueConfig {
        let mut cfg = base.clone();
        cfg.pools.enabled = self.pools();
        match self {
            Arm::Uniform => cfg.sampling.mode = dis_core::matchmaking::SamplingMode::Uniform,
            Arm::NoScenarios => cfg.scenario_mix = 0.0,
            Arm::Builtin => cfg.sampling.builtin_opponent_rate = 0.1,
            Arm::ActionMasks => cfg.env.action_masks = true,
            _ => {}
        }
        cfg
    }
}

/// Parses a comma-separated arm list.
pub fn parse_arms(list: &str) -> Result<Vec<Arm>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            Arm::parse(s).ok_or_else(|| {
                let known: Vec<&str> = Arm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown arm `{s}` (known: {})", known.join(", "))
            })
        })
        .collect()
}

/// Final state of one arm's run.
#[derive(Clone, Debug)]
pub struct ArmRun {
    /// Arm name, suffixed with `#k` when the arm is listed more than once.
    pub label: String,
    pub arm: Arm,
    pub dir: PathBuf,
    pub main: Arc<Net>,
    pub iterations: u64,
}

/// Runs every arm from the same seed and starting point for the same budget,
/// each in its own subdirectory of `dir`.
pub fn run_arms(
    base: &LeagueConfig,
    arms: &[Arm],
    dir: &Path,
    budget: Budget,
    start: Option<&Net>,
) -> Result<Vec<ArmRun>, LeagueError> {
    let mut out: Vec<ArmRun> = Vec::new();
    for &arm in arms {
        let repeats = out.iter().filter(|r| r.arm == arm).count();
        let label = if repeats == 0 {
            arm.name().to_string()
        } else {
            format!("{}#{}", arm.name(), repeats + 1)
        };
        let arm_dir = dir.join(&label);
        log::info!("ablation arm {label}");
        let mut league = match League::create(arm.apply(base), &arm_dir, start) {
            Err(LeagueError::Exists(_)) => League::resume(&arm_dir)?,
            other => other?,
        };
        let iterations = league.run(budget)?;
        out.push(ArmRun {
            label,
            arm,
            dir: arm_dir,
            main: Arc::new(league.main().learner.net.clone()),
            iterations,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub tournament: Tournament,
    /// (label, rating, score rate), best first.
    pub table: Vec<(String, f64, f64)>,
}

impl AblationReport {
    pub fn rating(&self, label: &str) -> Option<f64> {
        self.table.iter().find(|r| r.0 == label).map(|r| r.1)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("rank  arm               elo      score\n");
        for (i, (label, elo, score)) in self.table.iter().enumerate() {
            let _ = writeln!(s, "{:>4}  {:<16} {:>7.1}  {:>6.3}", i + 1, label, elo, score);
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,arm,elo,score\n");
        for (i, (label, elo, score)) in self.table.iter().enumerate() {
            let _ = writeln!(s, "{},{},{:.3},{:.4}", i + 1, label, elo, score);
        }
        s
    }
}

/// Round robin between the arms' final main agents on `env`.
pub fn cross_play(
    runs: &[ArmRun],
    env: &EnvConfig,
    games_per_pair: usize,
    selection: Selection,
    seed: u64,
    workers: usize,
) -> AblationReport {
    let entrants: Vec<(CheckpointId, Actor)> = runs
        .iter()
        .map(|r| (CheckpointId::new(r.label.clone(), 0), Actor::from_net(r.main.clone(), env)))
        .collect();
    let t = tournament(&entrants, games_per_pair, env, selection, seed, workers);
    let mut table: Vec<(String, f64, f64)> = t
        .ids
        .iter()
        .map(|id| {
            let r = t.rating.table.rating(id).unwrap_or(t.rating.table.initial);
            (id.agent.clone(), r, t.rating.win_rate(id))
        })
        .collect();
    table.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.total_cmp(&a.2)));
    AblationReport { tournament: t, table }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arm_pool_sets() {
        assert_eq!(Arm::Full.pools().len(), 5);
        assert_eq!(Arm::NoDmmp.pools(), vec![PoolKind::Shmp, PoolKind::Lhmp, PoolKind::Smp, PoolKind::Dpmp]);
        assert_eq!(Arm::NoDpmp.pools(), vec![PoolKind::Shmp, PoolKind::Lhmp, PoolKind::Smp]);
        assert_eq!(Arm::ShmpLhmp.pools(), vec![PoolKind::Shmp, PoolKind::Lhmp]);
        assert_eq!(Arm::ShmpOnly.pools(), vec![PoolKind::Shmp]);
        assert!(Arm::SelfPlayOnly.pools().is_empty());
    }

    #[test]
    fn factor_arms_change_one_setting() {
        let base = LeagueConfig::desk();
        let u = Arm::Uniform.apply(&base);
        assert_eq!(u.sampling.mode, dis_core::matchmaking::SamplingMode::Uniform);
        assert_eq!(Arm::NoScenarios.apply(&base).scenario_mix, 0.0);
        assert_eq!(Arm::Builtin.apply(&base).sampling.builtin_opponent_rate, 0.1);
        assert!(Arm::ActionMasks.apply(&base).env.action_masks);
        let f = Arm::Full.apply(&base);
        assert_eq!(f.to_toml(), {
            let mut b = base.clone();
            b.pools.enabled = ALL_POOLS.to_vec();
            b.to_toml()
        });
        for a in Arm::ALL {
            a.apply(&base).validate().unwrap();
        }
    }

    #[test]
    fn arm_list_parsing() {
        assert_eq!(parse_arms("full, ablation5").unwrap(), vec![Arm::Full, Arm::SelfPlayOnly]);
        assert!(parse_arms("full,bogus").unwrap_err().contains("bogus"));
    }
}
