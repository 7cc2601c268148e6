//! Line-delimited JSON replays, one record per step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::geometry::Cell;
use crate::state::MatchState;
use crate::step::{Event, StepResult};
use crate::EnvError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub step: u32,
    /// Player positions after the step, in player order.
    pub positions: Vec<Cell>,
    pub ball: Cell,
    pub owner: Option<usize>,
    /// Executed action indices in field coordinates.
    pub actions: Vec<usize>,
    pub events: Vec<Event>,
}

impl ReplayRecord {
    pub fn capture(s: &MatchState, result: &StepResult) -> Self {
        Self {
            step: s.steps_elapsed,
            positions: s.players.iter().map(|p| p.position).collect(),
            ball: s.ball_cell(),
            owner: s.owner(),
            actions: result.executed.iter().map(|a| a.index()).collect(),
            events: result.events.clone(),
        }
    }
}

pub struct ReplayWriter<W: Write> {
    out: W,
}

impl<W: Write> ReplayWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, rec: &ReplayRecord) -> Result<(), EnvError> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_replay<R: BufRead>(input: R) -> Result<Vec<ReplayRecord>, EnvError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
