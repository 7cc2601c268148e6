//! Turns step events into per-player rewards.

use crate::config::RewardConfig;
use crate::state::Team;
use crate::step::Event;

/// Goal difference from `team`'s side, clipped when configured.
pub fn goal_difference(score: [u32; 2], team: Team, clip: Option<i32>) -> i32 {
    let d = score[team.index()] as i32 - score[team.other().index()] as i32;
    match clip {
        Some(c) => d.clamp(-c, c),
        None => d,
    }
}

/// Signed event counts behind one player's reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RewardCounts {
    pub goal: i32,
    pub win: i32,
    pub possession: i32,
    pub out_of_bounds: u32,
    pub hold_ball: u32,
    pub secondary_attack: u32,
    pub successful_slide: u32,
}

impl RewardCounts {
    /// Weighted sum of the counts, always in the same order so that equal
    /// counts give bit-identical rewards.
    pub fn value(&self, cfg: &RewardConfig) -> f64 {
        let mut r = cfg.goal * self.goal as f64 + cfg.win * self.win as f64 + cfg.possession * self.possession as f64;
        r += cfg.out_of_bounds * self.out_of_bounds as f64;
        if cfg.hold_ball_enabled {
            r += cfg.hold_ball * self.hold_ball as f64;
        }
        if cfg.secondary_attack_enabled {
            r += cfg.secondary_attack * self.secondary_attack as f64;
        }
        if cfg.successful_slide_enabled {
            r += cfg.successful_slide * self.successful_slide as f64;
        }
        r
    }
}

/// Event counts for `team`'s controlled players (`controlled`, in the order
/// the policy sees them).
pub fn reward_counts(events: &[Event], clip: Option<i32>, controlled: &[usize], team: Team) -> Vec<RewardCounts> {
    let mut shared = RewardCounts::default();
    let mut own = vec![RewardCounts::default(); controlled.len()];
    let slot = |p: usize| controlled.iter().position(|&q| q == p);
    for e in events {
        match *e {
            Event::Goal { team: scorer, score, .. } => {
                let mut before = score;
                before[scorer.index()] -= 1;
                shared.goal += goal_difference(score, team, clip) - goal_difference(before, team, clip);
            }
            Event::MatchEnd { score } => shared.win += goal_difference(score, team, clip).signum(),
            Event::PossessionChange { gained, .. } => shared.possession += if gained == team { 1 } else { -1 },
            Event::OutOfBounds { player } => {
                if let Some(i) = slot(player) {
                    own[i].out_of_bounds += 1;
                }
            }
            Event::HoldBall { player } => {
                if let Some(i) = slot(player) {
                    own[i].hold_ball += 1;
                }
            }
            Event::SecondaryAttack { player } => {
                if let Some(i) = slot(player) {
                    own[i].secondary_attack += 1;
                }
            }
            Event::SlideSuccess { player } => {
                if let Some(i) = slot(player) {
                    own[i].successful_slide += 1;
                }
            }
            Event::Degraded { .. } => {}
        }
    }
    for c in &mut own {
        c.goal = shared.goal;
        c.win = shared.win;
        c.possession = shared.possession;
    }
    own
}

/// Rewards for `team`'s controlled players. Team rewards go to every entry;
/// individual rewards only to the player who earned them.
pub fn compute_rewards(events: &[Event], cfg: &RewardConfig, controlled: &[usize], team: Team) -> Vec<f64> {
    reward_counts(events, cfg.goal_clip, controlled, team)
        .iter()
        .map(|c| c.value(cfg))
        .collect()
}
