//! Built-in rule policies: the outfield baseline and the keeper script.
//!
//! Both reason in the acting team's coordinates. The baseline's rules, in
//! priority order:
//!
//! * on the ball within two cells of the goal mouth in the attacking half: shoot;
//! * on the ball with an opponent within one cell and an open teammate: short pass;
//! * on the ball otherwise: carry it toward the goal mouth;
//! * teammate on the ball: move into space ahead of the carrier;
//! * opponent on the ball and adjacent: slide, or wait on its cell for a steal;
//! * otherwise: chase the ball.

use crate::actions::Action;
use crate::config::EnvConfig;
use crate::geometry::{line, Cell, Dir};
use crate::rules::legal_action_mask;
use crate::state::{MatchState, Team};
use crate::step::SHORT_PASS_RANGE;

fn toward(from: Cell, to: Cell) -> Action {
    Dir::between(from, to).map_or(Action::Idle, Action::Move)
}

/// Distance from a team-coordinate cell to the attacked goal mouth.
pub fn goal_distance(s: &MatchState, local: Cell) -> i32 {
    s.field
        .goal_rows()
        .map(|y| local.chebyshev(Cell::new(s.field.width, y)))
        .min()
        .unwrap()
}

struct View<'a> {
    s: &'a MatchState,
    team: Team,
}

impl View<'_> {
    fn at(&self, p: usize) -> Cell {
        self.s.to_team(self.team, self.s.players[p].position)
    }

    fn opponents(&self) -> impl Iterator<Item = usize> + '_ {
        self.s.team_range(self.team.other())
    }
}

fn outfield(s: &MatchState, p: usize) -> Action {
    let team = s.players[p].team;
    let v = View { s, team };
    let me = v.at(p);
    let ball = s.to_team(team, s.ball_cell());
    let (w, h) = (s.field.width, s.field.height);
    match s.owner() {
        Some(o) if o == p => {
            if goal_distance(s, me) <= 2 && me.x >= w / 2 {
                return Action::Shot;
            }
            let pressed = v.opponents().any(|q| v.at(q).chebyshev(me) <= 1);
            if pressed {
                // the short pass goes to the nearest teammate; is its lane clear?
                let mate = s
                    .team_range(team)
                    .filter(|&q| q != p && v.at(q).chebyshev(me) <= SHORT_PASS_RANGE)
                    .min_by_key(|&q| (v.at(q).chebyshev(me), q));
                if let Some(q) = mate {
                    let mut lane = line(me, v.at(q));
                    lane.pop();
                    let open = !lane.iter().any(|c| v.opponents().any(|r| v.at(r) == *c));
                    if open {
                        return Action::ShortPass;
                    }
                }
            }
            let rows = s.field.goal_rows();
            let target = Cell::new(w - 1, me.y.clamp(*rows.start(), *rows.end()));
            if me == target {
                Action::Shot
            } else {
                toward(me, target)
            }
        }
        Some(o) if s.players[o].team == team => {
            let carrier = v.at(o);
            let y = if (me.y - carrier.y).abs() < 3 {
                if carrier.y < h / 2 {
                    carrier.y + 4
                } else {
                    carrier.y - 4
                }
            } else {
                me.y
            };
            toward(me, s.field.clamp(Cell::new((carrier.x + 3).min(w - 2), y)))
        }
        Some(_) => match me.chebyshev(ball) {
            0 => Action::Idle,
            1 => Action::Slide,
            _ => toward(me, ball),
        },
        None => toward(me, ball),
    }
}

fn keeper(s: &MatchState, p: usize) -> Action {
    let team = s.players[p].team;
    let v = View { s, team };
    let me = v.at(p);
    let ball = s.to_team(team, s.ball_cell());
    if s.owner() == Some(p) {
        let close_mate = s
            .team_range(team)
            .any(|q| q != p && v.at(q).chebyshev(me) <= SHORT_PASS_RANGE);
        return if close_mate { Action::ShortPass } else { Action::LongPass };
    }
    if s.owner().is_none() && ball.x <= 2 && me.chebyshev(ball) <= 1 {
        return toward(me, ball);
    }
    let rows = s.field.goal_rows();
    toward(me, Cell::new(0, ball.y.clamp(*rows.start(), *rows.end())))
}

fn legal_or_idle(s: &MatchState, cfg: &EnvConfig, p: usize, local: Action) -> Action {
    let mask = legal_action_mask(s, cfg, p);
    if mask[local.index()] {
        local
    } else {
        Action::Idle
    }
}

/// Baseline action for any player, in its team's coordinates.
pub fn scripted_action(s: &MatchState, cfg: &EnvConfig, p: usize) -> Action {
    let a = if s.players[p].is_keeper { keeper(s, p) } else { outfield(s, p) };
    legal_or_idle(s, cfg, p, a)
}

/// Baseline action indices for a list of players.
pub fn scripted_actions(s: &MatchState, cfg: &EnvConfig, players: &[usize]) -> Vec<usize> {
    players.iter().map(|&p| scripted_action(s, cfg, p).index()).collect()
}

/// Keeper script in field coordinates.
pub fn keeper_action(s: &MatchState, cfg: &EnvConfig, p: usize) -> Action {
    let local = legal_or_idle(s, cfg, p, keeper(s, p));
    match s.players[p].team {
        Team::Home => local,
        Team::Away => local.rotated(),
    }
}
