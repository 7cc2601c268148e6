//! Legal-action masks.
//!
//! A player is near the ball when it owns it or the ball lies free within
//! the configured far distance. The mask applies five rules:
//!
//! 1. passes and shots need the player near the ball;
//! 2. slides need the player near the ball or an opponent on the ball;
//! 3. a release is only legal while in that sticky state;
//! 4. sprint and dribble are illegal while already in that state;
//! 5. no shots from the own half.
//!
//! A stunned player may only idle.

use crate::actions::Action;
use crate::config::EnvConfig;
use crate::state::{BallState, MatchState};

pub fn near_ball(s: &MatchState, cfg: &EnvConfig, player: usize) -> bool {
    match s.ball {
        BallState::Owned { player: o } => o == player,
        BallState::Free { cell } => s.players[player].position.chebyshev(cell) <= cfg.far_distance,
    }
}

/// Boolean mask over the configured action space. Indices match
/// [`Action::index`] and do not depend on the team.
pub fn legal_action_mask(s: &MatchState, cfg: &EnvConfig, player: usize) -> Vec<bool> {
    let n = cfg.action_count();
    let p = &s.players[player];
    if p.stunned > 0 {
        let mut m = vec![false; n];
        m[Action::Idle.index()] = true;
        return m;
    }
    let near = near_ball(s, cfg, player);
    let close = p.position.chebyshev(s.ball_cell()) <= cfg.far_distance;
    let opponent_on_ball = s.owner_team().is_some_and(|t| t != p.team);
    (0..n)
        .map(|i| match Action::from_index(i).unwrap() {
            Action::LongPass | Action::ShortPass => near,
            Action::Shot => near && !s.in_own_half(p.team, p.position),
            Action::Slide => close || opponent_on_ball,
            Action::Sprint => !p.sprinting,
            Action::ReleaseSprint => p.sprinting,
            Action::Dribble => !p.dribbling,
            Action::ReleaseDribble => p.dribbling,
            Action::Idle | Action::Move(_) => true,
        })
        .collect()
}

/// Whether an action can be carried out at all, mask or not. Every action
/// allowed by [`legal_action_mask`] is physically possible.
pub fn physically_possible(s: &MatchState, cfg: &EnvConfig, player: usize, a: Action) -> bool {
    let p = &s.players[player];
    if p.stunned > 0 {
        return a == Action::Idle;
    }
    if a.index() >= cfg.action_count() {
        return false;
    }
    match a {
        Action::LongPass | Action::ShortPass | Action::Shot => near_ball(s, cfg, player),
        Action::Sprint => !p.sprinting,
        Action::ReleaseSprint => p.sprinting,
        Action::Dribble => !p.dribbling,
        Action::ReleaseDribble => p.dribbling,
        Action::Idle | Action::Move(_) | Action::Slide => true,
    }
}
