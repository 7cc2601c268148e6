//! CSV logs: one training row per agent iteration and one rating row per
//! screened checkpoint.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const METRICS_FILE: &str = "metrics.csv";
pub const ELO_FILE: &str = "elo.csv";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub league_iteration: u64,
    pub agent: String,
    pub iteration: u64,
    pub episodes: u64,
    pub samples: u64,
    pub self_play_episodes: u32,
    pub wins: u32,
    pub draws: u32,
    pub losses: u32,
    /// Over games against history models and the baseline.
    pub win_rate: f64,
    pub draw_rate: f64,
    pub loss_rate: f64,
    pub goals_for: u32,
    pub goals_against: u32,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub intrinsic_value_loss: f64,
    pub prediction_loss: f64,
    pub total_loss: f64,
    pub grad_norm: f64,
    pub entropy_coefficient: f64,
    pub minibatches_dropped: u32,
    pub failed_episodes: u32,
    pub rolled_back: bool,
    /// Rating of the agent's best top-pool member, once screened.
    pub top_elo: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloRow {
    pub league_iteration: u64,
    pub agent: String,
    /// `screen` or `top_pool`.
    pub round: String,
    pub checkpoint: String,
    pub rating: f64,
    pub win_rate: f64,
    pub rank: Option<usize>,
}

/// Appends rows to a CSV file, writing the header only into an empty file.
pub struct CsvLog {
    path: PathBuf,
    rows: u64,
}

impl CsvLog {
    /// Opens `path`, keeping only the first `keep_rows` data rows when given
    /// (used on resume to drop rows written after the last manifest).
    pub fn open(path: &Path, keep_rows: Option<u64>) -> std::io::Result<Self> {
        let mut rows = 0;
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<Result<_, _>>()?;
            let data = lines.len().saturating_sub(1) as u64;
            rows = keep_rows.map_or(data, |k| k.min(data));
            if rows < data {
                let mut f = File::create(path)?;
                for l in &lines[..=rows as usize] {
                    writeln!(f, "{l}")?;
                }
            }
        } else {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            File::create(path)?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn append<T: Serialize>(&mut self, records: &[T]) -> std::io::Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let fresh = !self.path.exists() || fs::metadata(&self.path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        for r in records {
            w.serialize(r).map_err(std::io::Error::other)?;
        }
        w.flush()?;
        self.rows += records.len() as u64;
        Ok(())
    }
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}
