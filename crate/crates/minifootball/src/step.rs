//! Transition function and the events it emits.
//!
//! A step runs in phases: ball actions (passes and shots), slides, movement,
//! free-ball pickup, passive steals, then bookkeeping. A goal or a ball
//! leaving play during a scenario skips the remaining phases.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::Action;
use crate::config::EnvConfig;
use crate::geometry::{line, Cell, Dir};
use crate::rules::{legal_action_mask, physically_possible};
use crate::scripted::keeper_action;
use crate::state::{BallState, GameMode, MatchState, Team};
use crate::EnvError;

/// Success chance of a slide on an adjacent ball carrier.
pub const SLIDE_SUCCESS: f64 = 0.6;
pub const SLIDE_SUCCESS_VS_DRIBBLE: f64 = 0.3;
/// Chance an opponent sharing the carrier's cell takes the ball.
pub const STEAL: f64 = 0.3;
pub const STEAL_VS_DRIBBLE: f64 = 0.15;
pub const SLIDE_STUN_STEPS: u8 = 2;
pub const SHORT_PASS_RANGE: i32 = 6;
pub const LONG_PASS_RANGE: i32 = 14;
/// Long passes can only be cut out this close to either end.
pub const LONG_PASS_EXPOSED: i32 = 2;
/// Kick length when a pass finds no teammate.
pub const SHORT_KICK: i32 = 4;
pub const LONG_KICK: i32 = 8;

/// Scoring chance from king distance `d` to the goal mouth.
pub fn shot_probability(d: i32) -> f64 {
    (1.15 - 0.1 * d as f64).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// `score` is the score after the goal.
    Goal { team: Team, scorer: usize, score: [u32; 2] },
    /// One team gains the ball and the other loses it.
    PossessionChange { gained: Team, player: usize },
    OutOfBounds { player: usize },
    SlideSuccess { player: usize },
    SecondaryAttack { player: usize },
    HoldBall { player: usize },
    /// The requested action was illegal and replaced by idle.
    Degraded { player: usize, action: Action },
    MatchEnd { score: [u32; 2] },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepResult {
    pub events: Vec<Event>,
    pub done: bool,
    /// Actions actually executed, indexed by player, in field coordinates.
    pub executed: Vec<Action>,
    /// Player whose shot or pass was carried out this step.
    pub kicker: Option<usize>,
}

/// Players whose actions come from the policy, in player order.
pub fn controlled_players(s: &MatchState, cfg: &EnvConfig, team: Team) -> Vec<usize> {
    let r = s.team_range(team);
    if cfg.learned_keepers {
        r.collect()
    } else {
        r.skip(1).collect()
    }
}

fn gain(s: &mut MatchState, player: usize, events: &mut Vec<Event>) {
    s.ball = BallState::Owned { player };
    let team = s.players[player].team;
    if s.last_owner_team != Some(team) {
        events.push(Event::PossessionChange { gained: team, player });
    }
    s.last_owner_team = Some(team);
}

fn opponents_at(s: &MatchState, team: Team, c: Cell, keepers: bool) -> Vec<usize> {
    s.team_range(team.other())
        .filter(|&q| s.players[q].position == c && (keepers || !s.players[q].is_keeper))
        .collect()
}

fn nearest_opponent(s: &MatchState, team: Team, c: Cell) -> usize {
    s.team_range(team.other())
        .min_by_key(|&q| (s.players[q].position.chebyshev(c), q))
        .unwrap()
}

#[derive(Default)]
struct Kick {
    goal: bool,
    left_play: bool,
}

fn shoot<R: Rng + ?Sized>(s: &mut MatchState, cfg: &EnvConfig, p: usize, rng: &mut R, ev: &mut Vec<Event>) -> Kick {
    let team = s.players[p].team;
    let from = s.players[p].position;
    let gx = s.attacked_goal_x(team);
    let target = s
        .field
        .goal_rows()
        .map(|y| Cell::new(gx, y))
        .min_by_key(|c| (from.chebyshev(*c), (c.y - from.y).abs()))
        .unwrap();
    if let Some(d) = Dir::between(from, target) {
        s.players[p].facing = d;
    }
    let lane = std::iter::once(from).chain(line(from, target).into_iter().filter(|c| s.field.contains(*c)));
    let blocker = lane.into_iter().find_map(|c| opponents_at(s, team, c, false).first().copied());
    let roll: f64 = rng.gen();
    if let Some(b) = blocker {
        gain(s, b, ev);
        return Kick::default();
    }
    if roll < shot_probability(from.chebyshev(target)) {
        s.score[team.index()] += 1;
        ev.push(Event::Goal {
            team,
            scorer: p,
            score: s.score,
        });
        if let Some(t) = s.players[p].pass_received_at {
            if s.steps_elapsed - t <= cfg.secondary_attack_window {
                ev.push(Event::SecondaryAttack { player: p });
            }
        }
        if s.scenario_active {
            s.ball = BallState::Free {
                cell: s.field.clamp(target),
            };
        } else {
            s.kickoff_layout(team.other());
        }
        Kick {
            goal: true,
            left_play: false,
        }
    } else {
        let keeper = s.keeper(team.other());
        gain(s, keeper, ev);
        Kick::default()
    }
}

fn pass(s: &mut MatchState, p: usize, long: bool, ev: &mut Vec<Event>) -> Kick {
    let team = s.players[p].team;
    let from = s.players[p].position;
    let mates = s.team_range(team).filter(|&q| q != p);
    let receiver = if long {
        mates
            .filter(|&q| from.chebyshev(s.players[q].position) <= LONG_PASS_RANGE)
            .min_by_key(|&q| {
                let c = s.players[q].position;
                (-s.to_team(team, c).x, from.chebyshev(c), q)
            })
    } else {
        mates
            .filter(|&q| from.chebyshev(s.players[q].position) <= SHORT_PASS_RANGE)
            .min_by_key(|&q| (from.chebyshev(s.players[q].position), q))
    };
    match receiver {
        Some(q) => {
            let to = s.players[q].position;
            if let Some(d) = Dir::between(from, to) {
                s.players[p].facing = d;
            }
            let mut lane = line(from, to);
            lane.pop();
            let interceptor = lane
                .into_iter()
                .filter(|c| !long || c.chebyshev(from) <= LONG_PASS_EXPOSED || c.chebyshev(to) <= LONG_PASS_EXPOSED)
                .find_map(|c| opponents_at(s, team, c, true).first().copied());
            match interceptor {
                Some(i) => gain(s, i, ev),
                None => {
                    s.players[q].pass_received_at = Some(s.steps_elapsed);
                    gain(s, q, ev);
                }
            }
            Kick::default()
        }
        None => {
            let dir = s.players[p].facing;
            let mut c = from;
            for _ in 0..if long { LONG_KICK } else { SHORT_KICK } {
                let next = c.offset(dir);
                if !s.field.contains(next) {
                    ev.push(Event::OutOfBounds { player: p });
                    let q = nearest_opponent(s, team, c);
                    gain(s, q, ev);
                    return Kick {
                        goal: false,
                        left_play: true,
                    };
                }
                c = next;
                if let Some(&q) = opponents_at(s, team, c, true).first() {
                    gain(s, q, ev);
                    return Kick::default();
                }
            }
            s.ball = BallState::Free { cell: c };
            Kick::default()
        }
    }
}

/// Advances the match by one step.
///
/// `actions[t]` holds one action index per controlled player of team `t`
/// (see [`controlled_players`]), expressed in that team's coordinates.
pub fn step<R: Rng + ?Sized>(
    s: &mut MatchState,
    cfg: &EnvConfig,
    actions: &[Vec<usize>; 2],
    rng: &mut R,
) -> Result<StepResult, EnvError> {
    if s.done {
        return Err(EnvError::Finished);
    }
    let n = s.players.len();
    let mut acts = vec![Action::Idle; n];
    for team in Team::BOTH {
        let ctrl = controlled_players(s, cfg, team);
        let given = &actions[team.index()];
        if given.len() != ctrl.len() {
            return Err(EnvError::ActionCount {
                expected: ctrl.len(),
                found: given.len(),
            });
        }
        for (&p, &i) in ctrl.iter().zip(given) {
            let a = Action::from_index(i)
                .filter(|a| a.index() < cfg.action_count())
                .ok_or(EnvError::ActionIndex {
                    index: i,
                    count: cfg.action_count(),
                })?;
            acts[p] = match team {
                Team::Home => a,
                Team::Away => a.rotated(),
            };
        }
        if !cfg.learned_keepers {
            let k = s.keeper(team);
            acts[k] = keeper_action(s, cfg, k);
        }
    }

    let mut ev = Vec::new();
    for (p, a) in acts.iter_mut().enumerate() {
        let masked = cfg.action_masks && !legal_action_mask(s, cfg, p)[a.index()];
        if masked || !physically_possible(s, cfg, p, *a) {
            ev.push(Event::Degraded { player: p, action: *a });
            *a = Action::Idle;
        }
    }
    for p in s.players.iter_mut() {
        p.stunned = p.stunned.saturating_sub(1);
    }

    // ball actions: the owner, or one of the players kicking a free ball
    let kicks = |a: Action| matches!(a, Action::LongPass | Action::ShortPass | Action::Shot);
    let kicker = match s.ball {
        BallState::Owned { player } => Some(player).filter(|&o| kicks(acts[o])),
        BallState::Free { .. } => {
            let ks: Vec<usize> = (0..n).filter(|&p| kicks(acts[p])).collect();
            ks.choose(rng).copied()
        }
    };
    let kick = match kicker {
        Some(p) => match acts[p] {
            Action::Shot => shoot(s, cfg, p, rng, &mut ev),
            Action::LongPass => pass(s, p, true, &mut ev),
            _ => pass(s, p, false, &mut ev),
        },
        None => Kick::default(),
    };
    let interrupted = kick.goal || (s.scenario_active && kick.left_play);

    if !interrupted {
        let mut sliders: Vec<usize> = (0..n).filter(|&p| acts[p] == Action::Slide).collect();
        sliders.shuffle(rng);
        for p in sliders {
            let team = s.players[p].team;
            let target = s
                .owner()
                .filter(|&o| s.players[o].team != team && s.players[o].position.chebyshev(s.players[p].position) <= 1);
            match target {
                Some(o) => {
                    let chance = if s.players[o].dribbling {
                        SLIDE_SUCCESS_VS_DRIBBLE
                    } else {
                        SLIDE_SUCCESS
                    };
                    if let Some(d) = Dir::between(s.players[p].position, s.players[o].position) {
                        s.players[p].facing = d;
                    }
                    if rng.gen::<f64>() < chance {
                        gain(s, p, &mut ev);
                        ev.push(Event::SlideSuccess { player: p });
                    } else {
                        s.players[p].stunned = SLIDE_STUN_STEPS;
                    }
                }
                None => {
                    let next = s.players[p].position.offset(s.players[p].facing);
                    if s.field.contains(next) {
                        s.players[p].position = next;
                    }
                }
            }
        }

        for p in 0..n {
            let pl = &mut s.players[p];
            match acts[p] {
                Action::Move(d) => {
                    pl.facing = d;
                    let strides = if pl.sprinting { 2 } else { 1 };
                    for _ in 0..strides {
                        let next = pl.position.offset(d);
                        if !s.field.contains(next) {
                            if s.ball == (BallState::Owned { player: p }) {
                                ev.push(Event::OutOfBounds { player: p });
                            }
                            break;
                        }
                        pl.position = next;
                    }
                }
                Action::Sprint => pl.sprinting = true,
                Action::ReleaseSprint => pl.sprinting = false,
                Action::Dribble => pl.dribbling = true,
                Action::ReleaseDribble => pl.dribbling = false,
                _ => {}
            }
        }

        if let BallState::Free { cell } = s.ball {
            let here: Vec<usize> = (0..n)
                .filter(|&p| s.players[p].position == cell && s.players[p].stunned == 0)
                .collect();
            if let Some(&p) = here.choose(rng) {
                gain(s, p, &mut ev);
            }
        } else if let Some(o) = s.owner() {
            let team = s.players[o].team;
            let cell = s.players[o].position;
            let rivals: Vec<usize> = opponents_at(s, team, cell, true)
                .into_iter()
                .filter(|&q| s.players[q].stunned == 0)
                .collect();
            if !rivals.is_empty() {
                let chance = if s.players[o].dribbling { STEAL_VS_DRIBBLE } else { STEAL };
                if rng.gen::<f64>() < chance {
                    let q = *rivals.choose(rng).unwrap();
                    gain(s, q, &mut ev);
                }
            }
        }
    }

    if let Some(o) = s.owner() {
        ev.push(Event::HoldBall { player: o });
    }
    s.steps_elapsed += 1;
    if !(kick.goal && !s.scenario_active) {
        s.game_mode = GameMode::OpenPlay;
    }
    let done = s.steps_elapsed >= s.steps_total || (s.scenario_active && (kick.goal || kick.left_play));
    if done {
        ev.push(Event::MatchEnd { score: s.score });
        s.done = true;
    }
    debug_assert!(s.check().is_ok(), "{:?}", s.check());
    Ok(StepResult {
        events: ev,
        done,
        executed: acts,
        kicker,
    })
}
