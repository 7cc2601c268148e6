#![allow(dead_code)]

use dis_league::config::SchedulerMode;
use dis_league::LeagueConfig;

/// Desk profile cut down so a league iteration takes milliseconds.
pub fn tiny(seed: u64) -> LeagueConfig {
    let mut cfg = LeagueConfig::desk();
    cfg.seed = seed;
    cfg.env.max_steps = 120;
    cfg.ppo.batch_size = 512;
    cfg.ppo.minibatch_size = 256;
    cfg.pools.publish_every = 2;
    cfg.pools.lhmp_every = 4;
    cfg.pools.screen_every = 4;
    cfg.pools.screen_candidates = 3;
    cfg.pools.games_per_pair = 2;
    cfg.agents.explorer_sync_every = 6;
    cfg
}

pub fn serialized(mut cfg: LeagueConfig) -> LeagueConfig {
    cfg.schedule.mode = SchedulerMode::Serialized;
    cfg
}
