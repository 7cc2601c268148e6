//! Grid cells, the eight move directions and line-of-play helpers.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    /// King-move distance.
    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn offset(self, d: Dir) -> Cell {
        let (dx, dy) = d.delta();
        Cell::new(self.x + dx, self.y + dy)
    }

    /// One king step toward `target` (or `self` when already there).
    pub fn step_toward(self, target: Cell) -> Cell {
        Cell::new(self.x + (target.x - self.x).signum(), self.y + (target.y - self.y).signum())
    }
}

/// Move directions in the conventional football-environment order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dir {
    Left,
    TopLeft,
    Top,
    TopRight,
    Right,
    BottomRight,
    Bottom,
    BottomLeft,
}

impl Dir {
    pub const ALL: [Dir; 8] = [
        Dir::Left,
        Dir::TopLeft,
        Dir::Top,
        Dir::TopRight,
        Dir::Right,
        Dir::BottomRight,
        Dir::Bottom,
        Dir::BottomLeft,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&d| d == self).unwrap()
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir::Left => (-1, 0),
            Dir::TopLeft => (-1, -1),
            Dir::Top => (0, -1),
            Dir::TopRight => (1, -1),
            Dir::Right => (1, 0),
            Dir::BottomRight => (1, 1),
            Dir::Bottom => (0, 1),
            Dir::BottomLeft => (-1, 1),
        }
    }

    /// Direction after a half-turn of the field.
    pub fn rotated(self) -> Dir {
        Self::ALL[(self.index() + 4) % 8]
    }

    /// Direction of a king step from `from` to `to`, if they differ.
    pub fn between(from: Cell, to: Cell) -> Option<Dir> {
        let d = ((to.x - from.x).signum(), (to.y - from.y).signum());
        Self::ALL.into_iter().find(|dir| dir.delta() == d)
    }
}

/// Field dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub width: i32,
    pub height: i32,
}

impl Field {
    pub fn contains(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn clamp(&self, c: Cell) -> Cell {
        Cell::new(c.x.clamp(0, self.width - 1), c.y.clamp(0, self.height - 1))
    }

    /// Image of `c` under the half-turn that swaps the two ends.
    pub fn rotate(&self, c: Cell) -> Cell {
        Cell::new(self.width - 1 - c.x, self.height - 1 - c.y)
    }

    /// Rows spanned by the goal mouths (shared by both ends).
    pub fn goal_rows(&self) -> std::ops::RangeInclusive<i32> {
        let half = self.height / 2;
        half - 2..=half + 1
    }

    /// Largest king distance on the field.
    pub fn diameter(&self) -> i32 {
        (self.width - 1).max(self.height - 1)
    }
}

/// Cells strictly after `from` on the digital line to `to`, ending at `to`.
pub fn line(from: Cell, to: Cell) -> Vec<Cell> {
    let (dx, dy) = ((to.x - from.x).abs(), -(to.y - from.y).abs());
    let (sx, sy) = ((to.x - from.x).signum(), (to.y - from.y).signum());
    let mut err = dx + dy;
    let mut c = from;
    let mut out = Vec::new();
    while c != to {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            c.x += sx;
        }
        if e2 <= dx {
            err += dx;
            c.y += sy;
        }
        out.push(c);
    }
    out
}
