//! Opponent sampling: self-play with probability `alpha`, otherwise a history
//! model drawn with pool mass proportional to pool size and, within a pool,
//! a softmax over how hard each model has been to beat.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::CheckpointId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Win,
    Draw,
    Loss,
}

impl Outcome {
    /// Score from the training model's side: 1, 0.5 or 0.
    pub fn score(self) -> f64 {
        match self {
            Outcome::Win => 1.0,
            Outcome::Draw => 0.5,
            Outcome::Loss => 0.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Win => Outcome::Loss,
            Outcome::Draw => Outcome::Draw,
            Outcome::Loss => Outcome::Win,
        }
    }

    pub fn from_goals(own: u32, other: u32) -> Self {
        match own.cmp(&other) {
            std::cmp::Ordering::Greater => Outcome::Win,
            std::cmp::Ordering::Equal => Outcome::Draw,
            std::cmp::Ordering::Less => Outcome::Loss,
        }
    }
}

/// Weighted result counts against one opponent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub wins: f64,
    pub draws: f64,
    pub losses: f64,
    /// Raw number of games recorded, undecayed.
    pub games: u64,
}

impl PairRecord {
    pub fn weight(&self) -> f64 {
        self.wins + self.draws + self.losses
    }

    /// `(w, d)`, or `None` before any game.
    pub fn rates(&self) -> Option<(f64, f64)> {
        let n = self.weight();
        (self.games > 0 && n > 0.0).then(|| (self.wins / n, self.draws / n))
    }
}

/// Rates assumed for an opponent with no recorded games.
pub const PRIOR_WIN_RATE: f64 = 0.5;
pub const PRIOR_DRAW_RATE: f64 = 0.0;

/// Results of one training agent against its history opponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PairStatsRepr", into = "PairStatsRepr")]
pub struct PairStats {
    /// Multiplier applied to a pair's earlier results whenever a new game
    /// against that opponent is recorded. 1 keeps raw counts.
    pub decay: f64,
    records: BTreeMap<CheckpointId, PairRecord>,
}

#[derive(Serialize, Deserialize)]
struct PairStatsRepr {
    decay: f64,
    records: Vec<(CheckpointId, PairRecord)>,
}

impl From<PairStatsRepr> for PairStats {
    fn from(r: PairStatsRepr) -> Self {
        Self {
            decay: r.decay,
            records: r.records.into_iter().collect(),
        }
    }
}

impl From<PairStats> for PairStatsRepr {
    fn from(s: PairStats) -> Self {
        Self {
            decay: s.decay,
            records: s.records.into_iter().collect(),
        }
    }
}

impl Default for PairStats {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl PairStats {
    pub fn new(decay: f64) -> Self {
        assert!(decay > 0.0 && decay <= 1.0, "decay must lie in (0, 1]");
        Self {
            decay,
            records: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, opponent: &CheckpointId, outcome: Outcome) {
        let r = self.records.entry(opponent.clone()).or_default();
        if self.decay < 1.0 {
            r.wins *= self.decay;
            r.draws *= self.decay;
            r.losses *= self.decay;
        }
        match outcome {
            Outcome::Win => r.wins += 1.0,
            Outcome::Draw => r.draws += 1.0,
            Outcome::Loss => r.losses += 1.0,
        }
        r.games += 1;
    }

    pub fn get(&self, opponent: &CheckpointId) -> Option<&PairRecord> {
        self.records.get(opponent)
    }

    /// `(w, d)` against `opponent`, falling back to the neutral prior.
    pub fn rates(&self, opponent: &CheckpointId) -> (f64, f64) {
        self.records
            .get(opponent)
            .and_then(PairRecord::rates)
            .unwrap_or((PRIOR_WIN_RATE, PRIOR_DRAW_RATE))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CheckpointId, &PairRecord)> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Hardness score `(1 - w - d/2)^p`.
pub fn hardness(w: f64, d: f64, exponent: f64) -> f64 {
    (1.0 - w - 0.5 * d).max(0.0).powf(exponent)
}

/// `p_i = (1 - alpha) n_i / n_total`; all zeros when every pool is empty.
pub fn pool_selection_probs(sizes: &[usize], alpha: f64) -> Vec<f64> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0.0; sizes.len()];
    }
    sizes.iter().map(|&n| (1.0 - alpha) * n as f64 / total as f64).collect()
}

/// Softmax of `scores / temperature`.
pub fn softmax_weights(scores: &[f64], temperature: f64) -> Vec<f64> {
    assert!(temperature > 0.0, "temperature must be positive");
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| ((s - m) / temperature).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// `P_j = p_i * softmax(score_j / T)` over the models of one pool.
pub fn opponent_probs(scores: &[f64], pool_prob: f64, temperature: f64) -> Vec<f64> {
    softmax_weights(scores, temperature).into_iter().map(|x| x * pool_prob).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Hardness-weighted softmax within each pool.
    Msm,
    /// Uniform over history models, same self-play rate.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub alpha: f64,
    pub temperature: f64,
    pub exponent: f64,
    pub mode: SamplingMode,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            temperature: 0.3,
            exponent: 1.0,
            mode: SamplingMode::Msm,
        }
    }
}

/// Contents of one visible pool, as handed to the sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolView {
    pub label: String,
    pub models: Vec<CheckpointId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionEntry {
    pub pool: String,
    pub checkpoint: CheckpointId,
    pub w: f64,
    pub d: f64,
    pub score: f64,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Opponent {
    SelfPlay,
    History { pool: String, checkpoint: CheckpointId },
}

/// Full categorical distribution over `{self} ∪ history models`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpponentDistribution {
    pub self_prob: f64,
    pub entries: Vec<DistributionEntry>,
}

impl OpponentDistribution {
    pub fn build(pools: &[PoolView], stats: &PairStats, cfg: &SamplingConfig) -> Self {
        let sizes: Vec<usize> = pools.iter().map(|p| p.models.len()).collect();
        let p_pool = pool_selection_probs(&sizes, cfg.alpha);
        let mut entries = Vec::with_capacity(sizes.iter().sum());
        for (pool, &pi) in pools.iter().zip(&p_pool) {
            if pool.models.is_empty() {
                continue;
            }
            let rates: Vec<(f64, f64)> = pool.models.iter().map(|m| stats.rates(m)).collect();
            let scores: Vec<f64> = rates.iter().map(|&(w, d)| hardness(w, d, cfg.exponent)).collect();
            let probs = match cfg.mode {
                SamplingMode::Msm => opponent_probs(&scores, pi, cfg.temperature),
                SamplingMode::Uniform => vec![pi / pool.models.len() as f64; pool.models.len()],
            };
            for (((id, (w, d)), score), prob) in pool.models.iter().zip(rates).zip(scores).zip(probs) {
                entries.push(DistributionEntry {
                    pool: pool.label.clone(),
                    checkpoint: id.clone(),
                    w,
                    d,
                    score,
                    prob,
                });
            }
        }
        let self_prob = if entries.is_empty() { 1.0 } else { cfg.alpha };
        Self { self_prob, entries }
    }

    pub fn total(&self) -> f64 {
        self.self_prob + self.entries.iter().map(|e| e.prob).sum::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Opponent {
        let u: f64 = rng.gen::<f64>() * self.total();
        if u < self.self_prob || self.entries.is_empty() {
            return Opponent::SelfPlay;
        }
        let mut acc = self.self_prob;
        for e in &self.entries {
            acc += e.prob;
            if u < acc {
                return Opponent::History {
                    pool: e.pool.clone(),
                    checkpoint: e.checkpoint.clone(),
                };
            }
        }
        let last = self.entries.last().unwrap();
        Opponent::History {
            pool: last.pool.clone(),
            checkpoint: last.checkpoint.clone(),
        }
    }
}
