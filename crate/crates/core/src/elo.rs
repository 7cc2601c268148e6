//! Logistic Elo ratings, randomized-order batch processing, and the top-k
//! selection that issues admission certificates.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::CheckpointId;

pub const INITIAL_RATING: f64 = 1000.0;
pub const K_FACTOR: f64 = 32.0;

/// Expected score of a player rated `ra` against one rated `rb`.
pub fn expected_score(ra: f64, rb: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloEntry {
    pub id: CheckpointId,
    pub rating: f64,
    pub games: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EloTable {
    pub k: f64,
    pub initial: f64,
    entries: Vec<EloEntry>,
    #[serde(skip)]
    index: HashMap<CheckpointId, usize>,
}

impl PartialEq for EloTable {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.initial == other.initial && self.entries == other.entries
    }
}

impl Default for EloTable {
    fn default() -> Self {
        Self::new(K_FACTOR, INITIAL_RATING)
    }
}

impl EloTable {
    pub fn new(k: f64, initial: f64) -> Self {
        Self {
            k,
            initial,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn slot(&mut self, id: &CheckpointId) -> usize {
        if self.index.len() != self.entries.len() {
            self.index = self.entries.iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect();
        }
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.entries.push(EloEntry {
            id: id.clone(),
            rating: self.initial,
            games: 0,
        });
        self.index.insert(id.clone(), self.entries.len() - 1);
        self.entries.len() - 1
    }

    /// Registers `id` at the initial rating if unseen.
    pub fn ensure(&mut self, id: &CheckpointId) {
        self.slot(id);
    }

    pub fn rating(&self, id: &CheckpointId) -> Option<f64> {
        self.entries.iter().find(|e| &e.id == id).map(|e| e.rating)
    }

    pub fn entries(&self) -> &[EloEntry] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.rating).sum()
    }

    /// One game; `score_a` is 1, 0.5 or 0 from `a`'s side.
    pub fn update(&mut self, a: &CheckpointId, b: &CheckpointId, score_a: f64) {
        let ia = self.slot(a);
        let ib = self.slot(b);
        let (ra, rb) = (self.entries[ia].rating, self.entries[ib].rating);
        let delta = self.k * (score_a - expected_score(ra, rb));
        self.entries[ia].rating += delta;
        self.entries[ib].rating -= delta;
        self.entries[ia].games += 1;
        self.entries[ib].games += 1;
    }

    /// Processes `games` in `passes` independently shuffled orders.
    pub fn process<R: Rng + ?Sized>(&mut self, games: &[GameResult], passes: usize, rng: &mut R) {
        for g in games {
            self.ensure(&g.a);
            self.ensure(&g.b);
        }
        let mut order: Vec<&GameResult> = games.iter().collect();
        for _ in 0..passes {
            order.shuffle(rng);
            for g in &order {
                self.update(&g.a, &g.b, g.score_a);
            }
        }
    }
}

/// A finished game between two checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub a: CheckpointId,
    pub b: CheckpointId,
    pub score_a: f64,
}

/// Round-robin fixture list over `n` candidates: every unordered pair plays
/// `games_per_pair` games, alternating which index takes the home side.
/// Returns `(home, away)` index pairs.
pub fn round_robin_schedule(n: usize, games_per_pair: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * n.saturating_sub(1) / 2 * games_per_pair);
    for i in 0..n {
        for j in i + 1..n {
            for g in 0..games_per_pair {
                v.push(if g % 2 == 0 { (i, j) } else { (j, i) });
            }
        }
    }
    v
}

/// Proof that a checkpoint came out of a screening or merge round. Only this
/// module can construct one; deserialization exists so a run manifest can
/// carry the top pool across a restart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    id: CheckpointId,
    rating: f64,
    rank: usize,
    recency: u64,
}

impl Certificate {
    pub fn id(&self) -> &CheckpointId {
        &self.id
    }

    pub fn rating(&self) -> f64 {
        self.rating
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn candidate(&self, win_rate: f64) -> Candidate {
        Candidate {
            id: self.id.clone(),
            win_rate,
            recency: self.recency,
        }
    }
}

/// Ranking inputs for one candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub id: CheckpointId,
    pub win_rate: f64,
    /// Larger is newer.
    pub recency: u64,
}

/// Orders candidates by rating, then win rate, then recency, all descending.
pub fn rank(table: &EloTable, candidates: &[Candidate]) -> Vec<(Candidate, f64)> {
    let mut v: Vec<(Candidate, f64)> = candidates
        .iter()
        .map(|c| (c.clone(), table.rating(&c.id).unwrap_or(table.initial)))
        .collect();
    v.sort_by(|(a, ra), (b, rb)| {
        rb.total_cmp(ra)
            .then(b.win_rate.total_cmp(&a.win_rate))
            .then(b.recency.cmp(&a.recency))
    });
    v
}

/// Top `k` candidates, each with a certificate.
pub fn certify_top(table: &EloTable, candidates: &[Candidate], k: usize) -> Vec<Certificate> {
    rank(table, candidates)
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (c, r))| Certificate {
            id: c.id,
            rating: r,
            rank: i,
            recency: c.recency,
        })
        .collect()
}

/// Ratings and score tallies from one round robin.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRobin {
    pub table: EloTable,
    pub games: Vec<GameResult>,
}

impl RoundRobin {
    /// Mean score of `id` over its games, 0.5 if it played none.
    pub fn win_rate(&self, id: &CheckpointId) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for g in &self.games {
            if &g.a == id {
                s += g.score_a;
                n += 1;
            } else if &g.b == id {
                s += 1.0 - g.score_a;
                n += 1;
            }
        }
        if n == 0 {
            0.5
        } else {
            s / n as f64
        }
    }

    /// Candidates with their round-robin win rates filled in.
    pub fn candidates(&self, ids: &[(CheckpointId, u64)]) -> Vec<Candidate> {
        ids.iter()
            .map(|(id, recency)| Candidate {
                id: id.clone(),
                win_rate: self.win_rate(id),
                recency: *recency,
            })
            .collect()
    }
}

/// Elo passes over finished round-robin games, in randomized order.
pub const ELO_PASSES: usize = 2;

/// Rates a finished round robin. Every candidate is rated, even one that
/// played no games.
pub fn rate_round_robin<R: Rng + ?Sized>(ids: &[CheckpointId], games: Vec<GameResult>, rng: &mut R) -> RoundRobin {
    let mut table = EloTable::default();
    for id in ids {
        table.ensure(id);
    }
    table.process(&games, ELO_PASSES, rng);
    RoundRobin { table, games }
}

/// Plays the full schedule through `play(home, away) -> home score` and
/// rates the results.
pub fn round_robin<R, F>(ids: &[CheckpointId], games_per_pair: usize, mut play: F, rng: &mut R) -> RoundRobin
where
    R: Rng + ?Sized,
    F: FnMut(&CheckpointId, &CheckpointId) -> f64,
{
    let games = round_robin_schedule(ids.len(), games_per_pair)
        .into_iter()
        .map(|(h, a)| GameResult {
            a: ids[h].clone(),
            b: ids[a].clone(),
            score_a: play(&ids[h], &ids[a]),
        })
        .collect();
    rate_round_robin(ids, games, rng)
}

/// Round robin over `candidates` (id, recency) and certification of the best
/// `k`.
pub fn screen_top<R, F>(
    candidates: &[(CheckpointId, u64)],
    k: usize,
    games_per_pair: usize,
    play: F,
    rng: &mut R,
) -> (RoundRobin, Vec<Certificate>)
where
    R: Rng + ?Sized,
    F: FnMut(&CheckpointId, &CheckpointId) -> f64,
{
    let ids: Vec<CheckpointId> = candidates.iter().map(|c| c.0.clone()).collect();
    let rr = round_robin(&ids, games_per_pair, play, rng);
    let certs = certify_top(&rr.table, &rr.candidates(candidates), k);
    (rr, certs)
}

/// Rolling set of the best checkpoints across screening rounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TopModelPool {
    members: Vec<Certificate>,
    /// Member ids after each merge.
    pub history: Vec<Vec<CheckpointId>>,
}

impl TopModelPool {
    pub const SIZE: usize = 3;

    pub fn members(&self) -> &[Certificate] {
        &self.members
    }

    /// Re-rates the union of current members and `fresh` by round robin and
    /// keeps the best [`TopModelPool::SIZE`]. Returns the round robin.
    pub fn merge_and_prune<R, F>(&mut self, fresh: &[Certificate], games_per_pair: usize, play: F, rng: &mut R) -> RoundRobin
    where
        R: Rng + ?Sized,
        F: FnMut(&CheckpointId, &CheckpointId) -> f64,
    {
        let mut union: Vec<(CheckpointId, u64)> = Vec::new();
        for c in self.members.iter().chain(fresh) {
            if !union.iter().any(|(id, _)| id == &c.id) {
                union.push((c.id.clone(), c.recency));
            }
        }
        let (rr, certs) = if union.len() <= 1 {
            let ids: Vec<CheckpointId> = union.iter().map(|u| u.0.clone()).collect();
            let rr = rate_round_robin(&ids, Vec::new(), rng);
            let certs = certify_top(&rr.table, &rr.candidates(&union), Self::SIZE);
            (rr, certs)
        } else {
            screen_top(&union, Self::SIZE, games_per_pair, play, rng)
        };
        self.members = certs;
        self.history.push(self.members.iter().map(|c| c.id.clone()).collect());
        rr
    }
}
