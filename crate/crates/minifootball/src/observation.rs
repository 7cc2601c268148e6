//! Per-player feature vectors.
//!
//! Everything is written in the observing team's coordinates, so mirrored
//! states give identical observations to the two teams. Block layout:
//!
//! | block | length |
//! |---|---|
//! | controlling player: x, y, facing dx, dy, sprinting, dribbling, on ball, stunned | 8 |
//! | ball: x, y, own, team, opponents, free, distance | 7 |
//! | teammates: dx, dy, on ball, per teammate | 3 per teammate |
//! | closest teammate | 3 |
//! | opponents: dx, dy, on ball, per opponent | 3 per opponent |
//! | closest opponent | 3 |
//! | available actions | action count |
//! | match state: goal difference, time left, time used, mode one-hot, scenario | 9 |
//! | sticky actions: sprinting, dribbling | 2 |
//! | distance to ball, every player | 2 × (team size + 1) |
//!
//! An optional history appends the previous `k` base frames, newest first,
//! with zeros before the episode start.

use std::collections::VecDeque;

use crate::config::EnvConfig;
use crate::geometry::Cell;
use crate::rules::legal_action_mask;
use crate::state::{BallState, GameMode, MatchState, Team};

const SELF_LEN: usize = 8;
const BALL_LEN: usize = 7;
const PEER_LEN: usize = 3;
const MATCH_LEN: usize = 9;
const STICKY_LEN: usize = 2;

/// Length of one frame for a configuration.
pub fn base_len(cfg: &EnvConfig) -> usize {
    let mates = cfg.team_size;
    let opps = cfg.team_size + 1;
    SELF_LEN
        + BALL_LEN
        + PEER_LEN * mates
        + PEER_LEN
        + PEER_LEN * opps
        + PEER_LEN
        + cfg.action_count()
        + MATCH_LEN
        + STICKY_LEN
        + 2 * (cfg.team_size + 1)
}

/// Length with `history` extra frames.
pub fn observation_len(cfg: &EnvConfig, history: usize) -> usize {
    base_len(cfg) * (history + 1)
}

fn unit(v: i32, max: i32) -> f64 {
    2.0 * v as f64 / max as f64 - 1.0
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

struct Frame<'a> {
    s: &'a MatchState,
    team: Team,
}

impl Frame<'_> {
    fn at(&self, p: usize) -> Cell {
        self.s.to_team(self.team, self.s.players[p].position)
    }

    fn pos(&self, c: Cell) -> [f64; 2] {
        [unit(c.x, self.s.field.width - 1), unit(c.y, self.s.field.height - 1)]
    }

    fn rel(&self, from: Cell, p: usize) -> [f64; 3] {
        let c = self.at(p);
        [
            (c.x - from.x) as f64 / (self.s.field.width - 1) as f64,
            (c.y - from.y) as f64 / (self.s.field.height - 1) as f64,
            flag(self.s.owner() == Some(p)),
        ]
    }

    fn dist(&self, a: Cell, b: Cell) -> f64 {
        a.chebyshev(b) as f64 / self.s.field.diameter() as f64
    }

    /// Teammates, then opponents, in player order.
    fn others(&self, p: usize) -> (Vec<usize>, Vec<usize>) {
        let mates = self.s.team_range(self.team).filter(|&q| q != p).collect();
        let opps = self.s.team_range(self.team.other()).collect();
        (mates, opps)
    }

    fn closest(&self, from: Cell, among: &[usize]) -> [f64; 3] {
        among
            .iter()
            .min_by_key(|&&q| (self.at(q).chebyshev(from), q))
            .map_or([0.0; 3], |&q| self.rel(from, q))
    }
}

/// Base frame for `player`.
pub fn encode_observation(s: &MatchState, cfg: &EnvConfig, player: usize) -> Vec<f64> {
    let me = &s.players[player];
    let f = Frame { s, team: me.team };
    let here = f.at(player);
    let ball = s.to_team(me.team, s.ball_cell());
    let facing = s.dir_to_team(me.team, me.facing).delta();
    let owns = s.owner() == Some(player);
    let mut v = Vec::with_capacity(base_len(cfg));

    v.extend(f.pos(here));
    v.extend([facing.0 as f64, facing.1 as f64]);
    v.extend([flag(me.sprinting), flag(me.dribbling), flag(owns), flag(me.stunned > 0)]);

    v.extend(f.pos(ball));
    v.extend([
        flag(owns),
        flag(s.owner_team() == Some(me.team)),
        flag(s.owner_team() == Some(me.team.other())),
        flag(matches!(s.ball, BallState::Free { .. })),
        f.dist(here, ball),
    ]);

    let (mates, opps) = f.others(player);
    for &q in &mates {
        v.extend(f.rel(here, q));
    }
    v.extend(f.closest(here, &mates));
    for &q in &opps {
        v.extend(f.rel(here, q));
    }
    v.extend(f.closest(here, &opps));

    v.extend(legal_action_mask(s, cfg, player).into_iter().map(flag));

    let diff = crate::rewards::goal_difference(s.score, me.team, Some(3));
    let total = s.steps_total.max(1) as f64;
    v.push(diff as f64 / 3.0);
    v.push(1.0 - 2.0 * s.steps_elapsed as f64 / total);
    v.push(2.0 * s.steps_elapsed as f64 / total - 1.0);
    for m in GameMode::ALL {
        v.push(flag(s.game_mode == m));
    }
    v.push(flag(s.scenario_active));

    v.extend([flag(me.sprinting), flag(me.dribbling)]);

    for team in [me.team, me.team.other()] {
        for q in s.team_range(team) {
            v.push(f.dist(f.at(q), ball));
        }
    }
    debug_assert_eq!(v.len(), base_len(cfg));
    v
}

/// Length of the centralized critic input.
pub fn global_len(cfg: &EnvConfig) -> usize {
    2 * (cfg.team_size + 1) * 8 + 5 + MATCH_LEN
}

/// Critic input for `team`: every player's state (own team first), the
/// ball, and the match state, all in `team`'s coordinates.
pub fn encode_global(s: &MatchState, cfg: &EnvConfig, team: Team) -> Vec<f64> {
    let f = Frame { s, team };
    let mut v = Vec::with_capacity(global_len(cfg));
    for t in [team, team.other()] {
        for q in s.team_range(t) {
            let p = &s.players[q];
            let d = s.dir_to_team(team, p.facing).delta();
            v.extend(f.pos(f.at(q)));
            v.extend([d.0 as f64, d.1 as f64]);
            v.extend([
                flag(p.sprinting),
                flag(p.dribbling),
                flag(s.owner() == Some(q)),
                flag(p.stunned > 0),
            ]);
        }
    }
    v.extend(f.pos(s.to_team(team, s.ball_cell())));
    v.extend([
        flag(s.owner_team() == Some(team)),
        flag(s.owner_team() == Some(team.other())),
        flag(matches!(s.ball, BallState::Free { .. })),
    ]);
    let diff = crate::rewards::goal_difference(s.score, team, Some(3));
    let total = s.steps_total.max(1) as f64;
    v.push(diff as f64 / 3.0);
    v.push(1.0 - 2.0 * s.steps_elapsed as f64 / total);
    v.push(2.0 * s.steps_elapsed as f64 / total - 1.0);
    for m in GameMode::ALL {
        v.push(flag(s.game_mode == m));
    }
    v.push(flag(s.scenario_active));
    debug_assert_eq!(v.len(), global_len(cfg));
    v
}

/// Stacks the last `depth` frames of one player behind the current one.
#[derive(Clone, Debug)]
pub struct HistoryStack {
    depth: usize,
    frames: VecDeque<Vec<f64>>,
}

impl HistoryStack {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            frames: VecDeque::with_capacity(depth),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// Returns the current frame followed by up to `depth` earlier ones,
    /// zero-padded, then remembers the current frame.
    pub fn push(&mut self, frame: Vec<f64>) -> Vec<f64> {
        let n = frame.len();
        let mut out = Vec::with_capacity(n * (self.depth + 1));
        out.extend_from_slice(&frame);
        for k in 0..self.depth {
            match self.frames.get(k) {
                Some(old) => out.extend_from_slice(old),
                None => out.extend(std::iter::repeat(0.0).take(n)),
            }
        }
        if self.depth > 0 {
            self.frames.push_front(frame);
            self.frames.truncate(self.depth);
        }
        out
    }
}
