//! Match state and the two ways of starting an episode.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EnvConfig, Region, ScenarioSpec, FORMATION};
use crate::geometry::{Cell, Dir, Field};
use crate::EnvError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Home,
    Away,
}

impl Team {
    pub const BOTH: [Team; 2] = [Team::Home, Team::Away];

    pub fn index(self) -> usize {
        match self {
            Team::Home => 0,
            Team::Away => 1,
        }
    }

    pub fn other(self) -> Team {
        match self {
            Team::Home => Team::Away,
            Team::Away => Team::Home,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerState {
    pub team: Team,
    pub position: Cell,
    /// Facing in field coordinates.
    pub facing: Dir,
    pub sprinting: bool,
    pub dribbling: bool,
    pub is_keeper: bool,
    /// Steps left before a failed slider can act again.
    pub stunned: u8,
    /// Step at which the player last received a completed pass.
    pub pass_received_at: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallState {
    Owned { player: usize },
    Free { cell: Cell },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameMode {
    OpenPlay,
    Kickoff,
    Corner,
    FreeKick,
    PenaltyBoxAttack,
}

impl GameMode {
    pub const ALL: [GameMode; 5] = [
        GameMode::OpenPlay,
        GameMode::Kickoff,
        GameMode::Corner,
        GameMode::FreeKick,
        GameMode::PenaltyBoxAttack,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).unwrap()
    }

    fn for_scenario(name: &str) -> GameMode {
        match name {
            "kickoff" => GameMode::Kickoff,
            "corner" => GameMode::Corner,
            "free_kick" => GameMode::FreeKick,
            "penalty_box_attack" => GameMode::PenaltyBoxAttack,
            _ => GameMode::OpenPlay,
        }
    }
}

/// Full simulator state. Players are stored home team first, each team
/// as keeper followed by its outfielders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchState {
    pub field: Field,
    pub team_size: usize,
    pub players: Vec<PlayerState>,
    pub ball: BallState,
    pub score: [u32; 2],
    pub steps_elapsed: u32,
    pub steps_total: u32,
    pub game_mode: GameMode,
    pub scenario_active: bool,
    /// Team that attacks in a scenario episode.
    pub offense: Option<Team>,
    /// Team that last had the ball, for possession-change bookkeeping.
    pub last_owner_team: Option<Team>,
    pub done: bool,
}

/// Keeper cell in team coordinates.
pub fn keeper_home_cell(field: &Field) -> Cell {
    Cell::new(0, field.height / 2 - 1)
}

impl MatchState {
    pub fn players_per_team(&self) -> usize {
        self.team_size + 1
    }

    /// Index range of a team's players.
    pub fn team_range(&self, team: Team) -> std::ops::Range<usize> {
        let n = self.players_per_team();
        team.index() * n..(team.index() + 1) * n
    }

    pub fn keeper(&self, team: Team) -> usize {
        self.team_range(team).start
    }

    /// Player index of a team's `slot`-th outfielder.
    pub fn outfielder(&self, team: Team, slot: usize) -> usize {
        self.keeper(team) + 1 + slot
    }

    pub fn owner(&self) -> Option<usize> {
        match self.ball {
            BallState::Owned { player } => Some(player),
            BallState::Free { .. } => None,
        }
    }

    pub fn ball_cell(&self) -> Cell {
        match self.ball {
            BallState::Owned { player } => self.players[player].position,
            BallState::Free { cell } => cell,
        }
    }

    pub fn owner_team(&self) -> Option<Team> {
        self.owner().map(|p| self.players[p].team)
    }

    /// Maps a field cell into `team`'s coordinates, where the team defends
    /// x = 0 and attacks toward x = width.
    pub fn to_team(&self, team: Team, c: Cell) -> Cell {
        match team {
            Team::Home => c,
            Team::Away => self.field.rotate(c),
        }
    }

    /// Inverse of [`MatchState::to_team`] (the half-turn is an involution).
    pub fn from_team(&self, team: Team, c: Cell) -> Cell {
        self.to_team(team, c)
    }

    pub fn dir_to_team(&self, team: Team, d: Dir) -> Dir {
        match team {
            Team::Home => d,
            Team::Away => d.rotated(),
        }
    }

    /// Column just beyond the goal line `team` attacks.
    pub fn attacked_goal_x(&self, team: Team) -> i32 {
        match team {
            Team::Home => self.field.width,
            Team::Away => -1,
        }
    }

    /// Whether `c` lies in `team`'s own half.
    pub fn in_own_half(&self, team: Team, c: Cell) -> bool {
        self.to_team(team, c).x < self.field.width / 2
    }

    /// Checks the structural invariants; used by tests and debug asserts.
    pub fn check(&self) -> Result<(), String> {
        if self.players.len() != 2 * self.players_per_team() {
            return Err("player count does not match team size".into());
        }
        for (i, p) in self.players.iter().enumerate() {
            if !self.field.contains(p.position) {
                return Err(format!("player {i} outside the field at {:?}", p.position));
            }
            let team = if i < self.players_per_team() { Team::Home } else { Team::Away };
            if p.team != team || p.is_keeper != (i == self.keeper(team)) {
                return Err(format!("player {i} has the wrong team or keeper flag"));
            }
        }
        match self.ball {
            BallState::Owned { player } if player >= self.players.len() => {
                return Err("ball owned by a missing player".into())
            }
            BallState::Free { cell } if !self.field.contains(cell) => return Err("free ball off the field".into()),
            _ => {}
        }
        if self.steps_elapsed > self.steps_total {
            return Err("steps_elapsed exceeds steps_total".into());
        }
        if self.scenario_active && self.steps_total > crate::config::SCENARIO_STEP_CAP {
            return Err("scenario longer than the step cap".into());
        }
        Ok(())
    }

    /// Puts both teams in kickoff formation with `kicking` on the ball.
    pub(crate) fn kickoff_layout(&mut self, kicking: Team) {
        let field = self.field;
        for team in Team::BOTH {
            let k = self.keeper(team);
            let cell = self.from_team(team, keeper_home_cell(&field));
            let facing = self.dir_to_team(team, Dir::Right);
            self.players[k] = fresh_player(team, cell, facing, true);
            for slot in 0..self.team_size {
                let (attack, defend) = FORMATION[slot];
                let local = if team == kicking { attack } else { defend };
                let cell = self.from_team(team, local);
                let i = self.outfielder(team, slot);
                self.players[i] = fresh_player(team, cell, facing, false);
            }
        }
        self.ball = BallState::Owned {
            player: self.outfielder(kicking, 0),
        };
        self.last_owner_team = Some(kicking);
        self.game_mode = GameMode::Kickoff;
    }
}

fn fresh_player(team: Team, position: Cell, facing: Dir, is_keeper: bool) -> PlayerState {
    PlayerState {
        team,
        position,
        facing,
        sprinting: false,
        dribbling: false,
        is_keeper,
        stunned: 0,
        pass_received_at: None,
    }
}

fn blank(cfg: &EnvConfig, steps_total: u32, scenario_active: bool) -> MatchState {
    let field = cfg.field();
    let n = cfg.team_size + 1;
    let players = (0..2 * n)
        .map(|i| {
            let team = if i < n { Team::Home } else { Team::Away };
            fresh_player(team, Cell::new(0, 0), Dir::Right, i % n == 0)
        })
        .collect();
    MatchState {
        field,
        team_size: cfg.team_size,
        players,
        ball: BallState::Free { cell: Cell::new(0, 0) },
        score: [0, 0],
        steps_elapsed: 0,
        steps_total,
        game_mode: GameMode::Kickoff,
        scenario_active,
        offense: None,
        last_owner_team: None,
        done: false,
    }
}

/// Kickoff formation, 0-0, home team on the ball. The rng is accepted for
/// interface symmetry with scenario resets; the layout is fixed.
pub fn reset_match<R: Rng + ?Sized>(cfg: &EnvConfig, _rng: &mut R) -> Result<MatchState, EnvError> {
    cfg.validate()?;
    let mut s = blank(cfg, cfg.max_steps, false);
    s.kickoff_layout(Team::Home);
    Ok(s)
}

fn sample_in<R: Rng + ?Sized>(r: &Region, rng: &mut R) -> Cell {
    Cell::new(rng.gen_range(r.x0..=r.x1), rng.gen_range(r.y0..=r.y1))
}

/// Starts a key-situation episode. Offense is drawn uniformly from the two
/// teams and the spec's regions are read in the offense's coordinates.
pub fn reset_scenario<R: Rng + ?Sized>(
    cfg: &EnvConfig,
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<MatchState, EnvError> {
    cfg.validate()?;
    spec.validate(cfg)?;
    let mut s = blank(cfg, spec.max_steps, true);
    let offense = if rng.gen_bool(0.5) { Team::Home } else { Team::Away };
    let defense = offense.other();
    let field = s.field;
    let whole = Region::new(0, field.width - 1, 0, field.height - 1);

    for team in Team::BOTH {
        let facing = s.dir_to_team(team, Dir::Right);
        let k = s.keeper(team);
        let cell = s.from_team(team, keeper_home_cell(&field));
        s.players[k] = fresh_player(team, cell, facing, true);
    }
    let ball = sample_in(&spec.ball, rng);
    for slot in 0..cfg.team_size {
        let local = match (slot, spec.offense.get(slot)) {
            (0, _) => ball,
            (_, Some(r)) => sample_in(r, rng),
            (_, None) => sample_in(&whole, rng),
        };
        let cell = s.from_team(offense, local);
        let facing = s.dir_to_team(offense, Dir::Right);
        let i = s.outfielder(offense, slot);
        s.players[i] = fresh_player(offense, cell, facing, false);
    }
    for slot in 0..cfg.team_size {
        // defenders' boxes are written in offense coordinates too
        let local = sample_in(spec.defense.get(slot).unwrap_or(&whole), rng);
        let cell = s.from_team(offense, local);
        let facing = s.dir_to_team(defense, Dir::Right);
        let i = s.outfielder(defense, slot);
        s.players[i] = fresh_player(defense, cell, facing, false);
    }
    s.ball = BallState::Owned {
        player: s.outfielder(offense, 0),
    };
    s.offense = Some(offense);
    s.last_owner_team = Some(offense);
    s.game_mode = GameMode::for_scenario(&spec.name);
    Ok(s)
}
