//! Environment, reward and scenario configuration.

use serde::{Deserialize, Serialize};

use crate::actions::action_count;
use crate::geometry::{Cell, Field};
use crate::EnvError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub width: i32,
    pub height: i32,
    /// Outfield players per team; each team also has a keeper.
    pub team_size: usize,
    pub max_steps: u32,
    /// Enables sprint/dribble states and their four actions.
    pub sticky_actions: bool,
    /// When set, actions outside the legal mask are degraded to idle.
    pub action_masks: bool,
    /// Distance beyond which a player counts as far from the ball.
    pub far_distance: i32,
    /// Keepers act through the policy instead of the built-in script.
    pub learned_keepers: bool,
    /// A goal within this many steps of receiving a pass is a secondary attack.
    pub secondary_attack_window: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            width: 24,
            height: 16,
            team_size: 2,
            max_steps: 400,
            sticky_actions: false,
            action_masks: false,
            far_distance: 1,
            learned_keepers: false,
            secondary_attack_window: 16,
        }
    }
}

impl EnvConfig {
    pub fn field(&self) -> Field {
        Field {
            width: self.width,
            height: self.height,
        }
    }

    pub fn action_count(&self) -> usize {
        action_count(self.sticky_actions)
    }

    /// Players each team controls through its policy.
    pub fn controlled_per_team(&self) -> usize {
        self.team_size + usize::from(self.learned_keepers)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.width < 12 || self.height < 8 || self.width % 2 != 0 || self.height % 2 != 0 {
            return Err(EnvError::Config("field must be at least 12x8 with even sides".into()));
        }
        if !(1..=formation_capacity()).contains(&self.team_size) {
            return Err(EnvError::Config(format!(
                "team_size must lie in 1..={}",
                formation_capacity()
            )));
        }
        if self.max_steps == 0 {
            return Err(EnvError::Config("max_steps must be positive".into()));
        }
        if self.far_distance < 0 {
            return Err(EnvError::Config("far_distance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Reward values and switches. Team rewards go to every controlled player
/// of the team; individual rewards only to the player who earned them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub goal: f64,
    pub win: f64,
    pub possession: f64,
    pub out_of_bounds: f64,
    pub hold_ball: f64,
    pub secondary_attack: f64,
    pub successful_slide: f64,
    pub hold_ball_enabled: bool,
    pub secondary_attack_enabled: bool,
    pub successful_slide_enabled: bool,
    /// Clips the goal difference used for goal and win rewards.
    pub goal_clip: Option<i32>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            goal: 1.0,
            win: 2.0,
            possession: 0.2,
            out_of_bounds: -0.001,
            hold_ball: 0.0003,
            secondary_attack: 0.1,
            successful_slide: 0.1,
            hold_ball_enabled: false,
            secondary_attack_enabled: false,
            successful_slide_enabled: false,
            goal_clip: None,
        }
    }
}

impl RewardConfig {
    /// Main rewards plus goal-difference clipping to ±3.
    pub fn goal_clipped() -> Self {
        Self {
            goal_clip: Some(3),
            ..Self::default()
        }
    }

    /// Main rewards plus the hold-ball reward.
    pub fn possession() -> Self {
        Self {
            hold_ball_enabled: true,
            ..Self::default()
        }
    }
}

/// Inclusive rectangle of cells, written for the side attacking +x.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x0: i32,
    pub x1: i32,
    pub y0: i32,
    pub y1: i32,
}

impl Region {
    pub const fn new(x0: i32, x1: i32, y0: i32, y1: i32) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn cells(&self) -> usize {
        if self.x1 < self.x0 || self.y1 < self.y0 {
            0
        } else {
            ((self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)) as usize
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        (self.x0..=self.x1).contains(&c.x) && (self.y0..=self.y1).contains(&c.y)
    }

    pub fn inside(&self, f: &Field) -> bool {
        self.cells() > 0 && f.contains(Cell::new(self.x0, self.y0)) && f.contains(Cell::new(self.x1, self.y1))
    }
}

/// A key situation to start episodes from. Regions are given for the
/// offense attacking +x; the state is half-turned when the away team is
/// drawn as offense.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub ball: Region,
    /// Spawn box per offensive outfielder, in player order. The first one
    /// carries the ball, so its box must contain the ball box. Players
    /// without a box spawn uniformly.
    pub offense: Vec<Region>,
    pub defense: Vec<Region>,
    pub max_steps: u32,
}

pub const SCENARIO_STEP_CAP: u32 = 512;

impl ScenarioSpec {
    pub fn validate(&self, cfg: &EnvConfig) -> Result<(), EnvError> {
        let f = cfg.field();
        if self.max_steps == 0 || self.max_steps > SCENARIO_STEP_CAP {
            return Err(EnvError::Config(format!(
                "scenario `{}`: max_steps must lie in 1..={SCENARIO_STEP_CAP}",
                self.name
            )));
        }
        for r in std::iter::once(&self.ball).chain(&self.offense).chain(&self.defense) {
            if !r.inside(&f) {
                return Err(EnvError::Config(format!(
                    "scenario `{}`: region {r:?} is empty or leaves the field",
                    self.name
                )));
            }
        }
        match self.offense.first() {
            Some(carrier)
                if carrier.contains(Cell::new(self.ball.x0, self.ball.y0))
                    && carrier.contains(Cell::new(self.ball.x1, self.ball.y1)) => {}
            _ => {
                return Err(EnvError::Config(format!(
                    "scenario `{}`: the first offense box must contain the ball box",
                    self.name
                )))
            }
        }
        if self.offense.len() > cfg.team_size || self.defense.len() > cfg.team_size {
            return Err(EnvError::Config(format!(
                "scenario `{}`: more spawn boxes than outfield players",
                self.name
            )));
        }
        // the goal cell in front of the defended net must stay clear
        let goal_cells: Vec<Cell> = f.goal_rows().map(|y| Cell::new(f.width - 1, y)).collect();
        for r in std::iter::once(&self.ball).chain(self.offense.iter().take(1)) {
            if goal_cells.iter().all(|&c| r.contains(c)) {
                return Err(EnvError::Config(format!(
                    "scenario `{}`: ball/offense region covers the defending goal",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Built-in scenarios for the default 24×16 field.
    pub fn builtin() -> Vec<ScenarioSpec> {
        let s = |name: &str, ball, offense: Vec<Region>, defense: Vec<Region>, max_steps| ScenarioSpec {
            name: name.into(),
            ball,
            offense,
            defense,
            max_steps,
        };
        vec![
            s(
                "kickoff",
                Region::new(11, 11, 7, 8),
                vec![Region::new(11, 11, 7, 8), Region::new(6, 10, 2, 13)],
                vec![Region::new(8, 11, 4, 11), Region::new(4, 9, 2, 13)],
                256,
            ),
            s(
                "corner",
                Region::new(23, 23, 0, 0),
                vec![Region::new(23, 23, 0, 0), Region::new(17, 21, 4, 11)],
                vec![Region::new(19, 22, 5, 10), Region::new(16, 21, 3, 12)],
                128,
            ),
            s(
                "free_kick",
                Region::new(14, 17, 3, 12),
                vec![Region::new(14, 17, 3, 12), Region::new(15, 20, 2, 13)],
                vec![Region::new(18, 20, 5, 10), Region::new(17, 21, 3, 12)],
                128,
            ),
            s(
                "penalty_box_attack",
                Region::new(17, 20, 4, 11),
                vec![Region::new(17, 20, 4, 11), Region::new(16, 21, 2, 13)],
                vec![Region::new(19, 22, 5, 10), Region::new(18, 22, 3, 12)],
                128,
            ),
            s(
                "solo",
                Region::new(8, 12, 3, 12),
                vec![Region::new(8, 12, 3, 12)],
                vec![Region::new(16, 20, 5, 10)],
                256,
            ),
        ]
    }

    pub fn builtin_named(name: &str) -> Option<ScenarioSpec> {
        Self::builtin().into_iter().find(|s| s.name == name)
    }
}

/// Kickoff formation rows, team coordinates (own goal at x = 0).
/// `(kicking side, defending side)` per outfield slot.
pub const FORMATION: [(Cell, Cell); 5] = [
    (Cell::new(11, 7), Cell::new(8, 7)),
    (Cell::new(8, 11), Cell::new(7, 11)),
    (Cell::new(7, 3), Cell::new(6, 3)),
    (Cell::new(4, 7), Cell::new(4, 8)),
    (Cell::new(9, 13), Cell::new(5, 13)),
];

pub fn formation_capacity() -> usize {
    FORMATION.len()
}
