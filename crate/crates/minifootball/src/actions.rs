//! Discrete action set and its index mapping.
//!
//! | index | action |
//! |---|---|
//! | 0 | idle |
//! | 1-8 | move left, top-left, top, top-right, right, bottom-right, bottom, bottom-left |
//! | 9 | long pass |
//! | 10 | short pass |
//! | 11 | shot |
//! | 12 | slide |
//! | 13 | sprint (sticky actions only) |
//! | 14 | release sprint (sticky actions only) |
//! | 15 | dribble (sticky actions only) |
//! | 16 | release dribble (sticky actions only) |
//!
//! Directions are always expressed from the acting team's point of view:
//! "right" points at the opponent goal for both teams.

use serde::{Deserialize, Serialize};

use crate::geometry::Dir;

pub const BASE_ACTIONS: usize = 13;
pub const STICKY_ACTIONS: usize = 17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Idle,
    Move(Dir),
    LongPass,
    ShortPass,
    Shot,
    Slide,
    Sprint,
    ReleaseSprint,
    Dribble,
    ReleaseDribble,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Idle => 0,
            Action::Move(d) => 1 + d.index(),
            Action::LongPass => 9,
            Action::ShortPass => 10,
            Action::Shot => 11,
            Action::Slide => 12,
            Action::Sprint => 13,
            Action::ReleaseSprint => 14,
            Action::Dribble => 15,
            Action::ReleaseDribble => 16,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Some(match i {
            0 => Action::Idle,
            1..=8 => Action::Move(Dir::ALL[i - 1]),
            9 => Action::LongPass,
            10 => Action::ShortPass,
            11 => Action::Shot,
            12 => Action::Slide,
            13 => Action::Sprint,
            14 => Action::ReleaseSprint,
            15 => Action::Dribble,
            16 => Action::ReleaseDribble,
            _ => return None,
        })
    }

    /// The same action seen from the other end of the field.
    pub fn rotated(self) -> Self {
        match self {
            Action::Move(d) => Action::Move(d.rotated()),
            a => a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Idle => "idle",
            Action::Move(Dir::Left) => "left",
            Action::Move(Dir::TopLeft) => "top_left",
            Action::Move(Dir::Top) => "top",
            Action::Move(Dir::TopRight) => "top_right",
            Action::Move(Dir::Right) => "right",
            Action::Move(Dir::BottomRight) => "bottom_right",
            Action::Move(Dir::Bottom) => "bottom",
            Action::Move(Dir::BottomLeft) => "bottom_left",
            Action::LongPass => "long_pass",
            Action::ShortPass => "short_pass",
            Action::Shot => "shot",
            Action::Slide => "slide",
            Action::Sprint => "sprint",
            Action::ReleaseSprint => "release_sprint",
            Action::Dribble => "dribble",
            Action::ReleaseDribble => "release_dribble",
        }
    }
}

/// Size of the action space for a configuration.
pub fn action_count(sticky_actions: bool) -> usize {
    if sticky_actions {
        STICKY_ACTIONS
    } else {
        BASE_ACTIONS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_round_trip() {
        for i in 0..STICKY_ACTIONS {
            assert_eq!(Action::from_index(i).unwrap().index(), i);
        }
        assert_eq!(Action::from_index(STICKY_ACTIONS), None);
        assert_eq!(Action::Move(Dir::Left).rotated(), Action::Move(Dir::Right));
        assert_eq!(Action::Shot.rotated(), Action::Shot);
    }
}
