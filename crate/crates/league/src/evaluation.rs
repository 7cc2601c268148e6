//! Evaluation games and what is derived from them: behavior counters,
//! position heatmaps, round-robin ratings and the ranked report a human
//! uses to pick the final model.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use dis_core::elo::{certify_top, rate_round_robin, round_robin_schedule, Certificate, GameResult, RoundRobin, TopModelPool};
use dis_core::matchmaking::Outcome;
use dis_core::CheckpointId;
use minifootball::replay::{ReplayRecord, ReplayWriter};
use minifootball::state::{reset_match, Team};
use minifootball::step::{controlled_players, step, Event};
use minifootball::{Action, Cell, EnvConfig, MatchState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actor::{derive_seed, Actor, Seat, Selection};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] minifootball::EnvError),
    #[error(transparent)]
    Net(#[from] dis_core::netcore::NetError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("outcome log line {line}: {message}")]
    Log { line: usize, message: String },
}

/// Width of the attacking box, counted from the goal line.
pub const BOX_DEPTH: i32 = 6;
/// Rows on each side of the centre line that belong to the box.
pub const BOX_HALF_WIDTH: i32 = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorCounters {
    pub goals: u32,
    pub shots: u32,
    pub shots_in_box: u32,
    pub short_passes: u32,
    pub long_passes: u32,
    pub slides: u32,
    pub possession_steps_self: u32,
    pub possession_steps_opponent: u32,
    pub ball_recoveries: u32,
    pub out_of_bounds: u32,
}

impl BehaviorCounters {
    pub const NAMES: [&'static str; 10] = [
        "goals",
        "shots",
        "shots_in_box",
        "short_passes",
        "long_passes",
        "slides",
        "possession_steps_self",
        "possession_steps_opponent",
        "ball_recoveries",
        "out_of_bounds",
    ];

    pub fn values(&self) -> [u32; 10] {
        [
            self.goals,
            self.shots,
            self.shots_in_box,
            self.short_passes,
            self.long_passes,
            self.slides,
            self.possession_steps_self,
            self.possession_steps_opponent,
            self.ball_recoveries,
            self.out_of_bounds,
        ]
    }
}

/// Result of one evaluation game. Index 0 is side `a` (home), 1 is `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub a: String,
    pub b: String,
    pub seed: u64,
    pub goals: [u32; 2],
    /// 0 or 1 for the winning side, `None` for a draw.
    pub winner: Option<usize>,
    pub steps: u32,
    pub counters: [BehaviorCounters; 2],
    /// Per-player occupancy counts, row-major `height × width`, each player
    /// in its own team's coordinates. Players in state order.
    pub occupancy: Vec<Vec<u32>>,
    pub width: i32,
    pub height: i32,
}

impl MatchOutcome {
    /// Score of side `a`: 1 win, 0.5 draw, 0 loss.
    pub fn score_a(&self) -> f64 {
        self.outcome_for(0).score()
    }

    pub fn outcome_for(&self, side: usize) -> Outcome {
        Outcome::from_goals(self.goals[side], self.goals[1 - side])
    }

    /// Sides on which `label` played (0, 1 or both).
    pub fn sides_of(&self, label: &str) -> Vec<usize> {
        [&self.a, &self.b]
            .iter()
            .enumerate()
            .filter(|(_, l)| l.as_str() == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn check(&self) -> Result<(), String> {
        let want = match self.goals[0].cmp(&self.goals[1]) {
            std::cmp::Ordering::Greater => Some(0),
            std::cmp::Ordering::Less => Some(1),
            std::cmp::Ordering::Equal => None,
        };
        if want != self.winner {
            return Err("winner inconsistent with goals".into());
        }
        for c in &self.counters {
            if c.possession_steps_self + c.possession_steps_opponent > self.steps {
                return Err("possession steps exceed episode length".into());
            }
        }
        if self.counters[0].goals != self.goals[0] || self.counters[1].goals != self.goals[1] {
            return Err("goal counters disagree with the score".into());
        }
        Ok(())
    }
}

fn in_box(s: &MatchState, team: Team, c: Cell) -> bool {
    let local = s.to_team(team, c);
    let mid = s.field.height / 2;
    local.x >= s.field.width - BOX_DEPTH && (local.y - mid).abs() <= BOX_HALF_WIDTH
}

/// Plays a full match from kickoff, `a` at home. Deterministic in `seed`.
pub fn play_match(
    a: (&str, &Actor),
    b: (&str, &Actor),
    cfg: &EnvConfig,
    seed: u64,
    selection: Selection,
) -> Result<MatchOutcome, EvalError> {
    play::<std::io::Sink>(a, b, cfg, seed, selection, None)
}

/// [`play_match`] that also writes one replay record per step.
pub fn play_match_recorded<W: Write>(
    a: (&str, &Actor),
    b: (&str, &Actor),
    cfg: &EnvConfig,
    seed: u64,
    selection: Selection,
    replay: &mut ReplayWriter<W>,
) -> Result<MatchOutcome, EvalError> {
    play(a, b, cfg, seed, selection, Some(replay))
}

fn play<W: Write>(
    a: (&str, &Actor),
    b: (&str, &Actor),
    cfg: &EnvConfig,
    seed: u64,
    selection: Selection,
    mut replay: Option<&mut ReplayWriter<W>>,
) -> Result<MatchOutcome, EvalError> {
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let mut act_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let mut s = reset_match(cfg, &mut env_rng)?;
    let n = cfg.controlled_per_team();
    let mut seats = [Seat::new(a.1.clone(), Team::Home, n), Seat::new(b.1.clone(), Team::Away, n)];
    let cells = (cfg.width * cfg.height) as usize;
    let mut occupancy = vec![vec![0u32; cells]; s.players.len()];
    let mut counters = [BehaviorCounters::default(); 2];
    loop {
        let mut actions = [Vec::new(), Vec::new()];
        for seat in seats.iter_mut() {
            let ctrl = controlled_players(&s, cfg, seat.team);
            actions[seat.team.index()] = seat.act(&s, cfg, &ctrl, selection, &mut act_rng)?;
        }
        let before = s.clone();
        let out = step(&mut s, cfg, &actions, &mut env_rng)?;
        if let Some(w) = replay.as_deref_mut() {
            w.write(&ReplayRecord::capture(&s, &out))?;
        }
        if let Some(k) = out.kicker {
            let team = before.players[k].team;
            let c = &mut counters[team.index()];
            match out.executed[k] {
                Action::Shot => {
                    c.shots += 1;
                    if in_box(&before, team, before.players[k].position) {
                        c.shots_in_box += 1;
                    }
                }
                Action::ShortPass => c.short_passes += 1,
                Action::LongPass => c.long_passes += 1,
                _ => {}
            }
        }
        for (p, a) in out.executed.iter().enumerate() {
            if *a == Action::Slide {
                counters[before.players[p].team.index()].slides += 1;
            }
        }
        for e in &out.events {
            match e {
                Event::Goal { team, .. } => counters[team.index()].goals += 1,
                Event::PossessionChange { gained, .. } => counters[gained.index()].ball_recoveries += 1,
                Event::OutOfBounds { player } => counters[before.players[*player].team.index()].out_of_bounds += 1,
                _ => {}
            }
        }
        if let Some(t) = s.owner_team() {
            counters[t.index()].possession_steps_self += 1;
            counters[t.other().index()].possession_steps_opponent += 1;
        }
        for (p, pl) in s.players.iter().enumerate() {
            let c = s.to_team(pl.team, pl.position);
            occupancy[p][(c.y * cfg.width + c.x) as usize] += 1;
        }
        if out.done {
            break;
        }
    }
    let outcome = MatchOutcome {
        a: a.0.to_string(),
        b: b.0.to_string(),
        seed,
        goals: s.score,
        winner: match s.score[0].cmp(&s.score[1]) {
            std::cmp::Ordering::Greater => Some(0),
            std::cmp::Ordering::Less => Some(1),
            std::cmp::Ordering::Equal => None,
        },
        steps: s.steps_elapsed,
        counters,
        occupancy,
        width: cfg.width,
        height: cfg.height,
    };
    debug_assert!(outcome.check().is_ok());
    Ok(outcome)
}

/// One scheduled evaluation game.
#[derive(Clone, Debug)]
pub struct GameJob {
    pub a: usize,
    pub b: usize,
    pub seed: u64,
}

/// Plays `jobs` over `workers` threads; results come back in job order.
pub fn play_games(
    jobs: &[GameJob],
    entrants: &[(String, Actor)],
    cfg: &EnvConfig,
    selection: Selection,
    workers: usize,
) -> Vec<Result<MatchOutcome, EvalError>> {
    let run = |j: &GameJob| {
        let (la, aa) = &entrants[j.a];
        let (lb, ab) = &entrants[j.b];
        play_match((la, aa), (lb, ab), cfg, j.seed, selection)
    };
    if workers <= 1 || jobs.len() <= 1 {
        return jobs.iter().map(run).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<MatchOutcome, EvalError>>> = (0..jobs.len()).map(|_| None).collect();
    let (tx, rx) = crossbeam::channel::unbounded();
    crossbeam::scope(|sc| {
        for _ in 0..workers.min(jobs.len()) {
            let tx = tx.clone();
            let next = &next;
            let run = &run;
            sc.spawn(move |_| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                if tx.send((i, run(&jobs[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx.iter() {
            slots[i] = Some(r);
        }
    })
    .expect("evaluation worker panicked");
    slots.into_iter().map(|s| s.expect("every job reports")).collect()
}

/// Outcomes and ratings of a round robin over named actors.
#[derive(Clone, Debug)]
pub struct Tournament {
    pub ids: Vec<CheckpointId>,
    pub outcomes: Vec<MatchOutcome>,
    pub rating: RoundRobin,
    /// Games that could not be played, with the reason.
    pub skipped: Vec<String>,
}

/// Every pair plays `games_per_pair` games with alternating home side,
/// concurrently; Elo is then processed serially in shuffled order.
pub fn tournament(
    entrants: &[(CheckpointId, Actor)],
    games_per_pair: usize,
    cfg: &EnvConfig,
    selection: Selection,
    seed: u64,
    workers: usize,
) -> Tournament {
    let ids: Vec<CheckpointId> = entrants.iter().map(|e| e.0.clone()).collect();
    let named: Vec<(String, Actor)> = entrants.iter().map(|(id, a)| (id.to_string(), a.clone())).collect();
    let jobs: Vec<GameJob> = round_robin_schedule(entrants.len(), games_per_pair)
        .into_iter()
        .enumerate()
        .map(|(g, (a, b))| GameJob {
            a,
            b,
            seed: derive_seed(seed, &[g as u64]),
        })
        .collect();
    let mut outcomes = Vec::new();
    let mut games = Vec::new();
    let mut skipped = Vec::new();
    for (j, r) in jobs.iter().zip(play_games(&jobs, &named, cfg, selection, workers)) {
        match r {
            Ok(o) => {
                games.push(GameResult {
                    a: ids[j.a].clone(),
                    b: ids[j.b].clone(),
                    score_a: o.score_a(),
                });
                outcomes.push(o);
            }
            Err(e) => {
                log::warn!("evaluation game {} vs {} skipped: {e}", ids[j.a], ids[j.b]);
                skipped.push(format!("{} vs {}: {e}", ids[j.a], ids[j.b]));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[u64::MAX]));
    let rating = rate_round_robin(&ids, games, &mut rng);
    Tournament {
        ids,
        outcomes,
        rating,
        skipped,
    }
}

/// Round robin over the candidates and certificates for the best three.
/// `recency` orders ties (larger is newer).
pub fn screen_top3(
    entrants: &[(CheckpointId, Actor, u64)],
    games_per_pair: usize,
    cfg: &EnvConfig,
    selection: Selection,
    seed: u64,
    workers: usize,
) -> (Tournament, Vec<Certificate>) {
    let plain: Vec<(CheckpointId, Actor)> = entrants.iter().map(|(i, a, _)| (i.clone(), a.clone())).collect();
    let t = tournament(&plain, games_per_pair, cfg, selection, seed, workers);
    let rec: Vec<(CheckpointId, u64)> = entrants.iter().map(|(i, _, r)| (i.clone(), *r)).collect();
    let certs = certify_top(&t.rating.table, &t.rating.candidates(&rec), TopModelPool::SIZE);
    (t, certs)
}

/// Merges fresh certificates into the top pool. Games are played up front,
/// in parallel, and replayed into the pool's own round robin.
pub fn merge_top_pool(
    pool: &mut TopModelPool,
    fresh: &[Certificate],
    actors: &HashMap<CheckpointId, Actor>,
    games_per_pair: usize,
    cfg: &EnvConfig,
    selection: Selection,
    seed: u64,
    workers: usize,
) -> RoundRobin {
    let mut union: Vec<CheckpointId> = Vec::new();
    for c in pool.members().iter().chain(fresh) {
        if !union.contains(c.id()) {
            union.push(c.id().clone());
        }
    }
    let named: Vec<(String, Actor)> = union
        .iter()
        .map(|id| (id.to_string(), actors.get(id).cloned().unwrap_or(Actor::Random)))
        .collect();
    let jobs: Vec<GameJob> = round_robin_schedule(union.len(), games_per_pair)
        .into_iter()
        .enumerate()
        .map(|(g, (a, b))| GameJob {
            a,
            b,
            seed: derive_seed(seed, &[g as u64]),
        })
        .collect();
    let results = play_games(&jobs, &named, cfg, selection, workers);
    let mut played: HashMap<(CheckpointId, CheckpointId), VecDeque<f64>> = HashMap::new();
    for (j, r) in jobs.iter().zip(results) {
        let score = match r {
            Ok(o) => o.score_a(),
            Err(e) => {
                log::warn!("top-pool game {} vs {} scored as a draw: {e}", union[j.a], union[j.b]);
                0.5
            }
        };
        played
            .entry((union[j.a].clone(), union[j.b].clone()))
            .or_default()
            .push_back(score);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[u64::MAX]));
    pool.merge_and_prune(
        fresh,
        games_per_pair,
        |h, a| {
            played
                .get_mut(&(h.clone(), a.clone()))
                .and_then(VecDeque::pop_front)
                .unwrap_or(0.5)
        },
        &mut rng,
    )
}

/// Counters of `label` across outcomes, from whichever side it played.
pub fn counters_of<'a>(outcomes: impl IntoIterator<Item = &'a MatchOutcome>, label: &str) -> Vec<BehaviorCounters> {
    outcomes
        .into_iter()
        .flat_map(|o| o.sides_of(label).into_iter().map(move |s| o.counters[s]))
        .collect()
}

/// Per-behavior mean per game, then divided by the largest mean among the
/// compared checkpoints so every behavior lies in [0, 1].
pub fn behavior_stats(per_checkpoint: &[(String, Vec<BehaviorCounters>)]) -> Vec<(String, [f64; 10])> {
    let means: Vec<[f64; 10]> = per_checkpoint
        .iter()
        .map(|(_, cs)| {
            let mut m = [0.0; 10];
            for c in cs {
                for (mi, v) in m.iter_mut().zip(c.values()) {
                    *mi += v as f64;
                }
            }
            let n = cs.len().max(1) as f64;
            m.map(|x| x / n)
        })
        .collect();
    let mut max = [0.0f64; 10];
    for m in &means {
        for (a, &b) in max.iter_mut().zip(m) {
            *a = a.max(b);
        }
    }
    per_checkpoint
        .iter()
        .zip(means)
        .map(|((label, _), m)| {
            let mut out = [0.0; 10];
            for i in 0..10 {
                out[i] = if max[i] > 0.0 { m[i] / max[i] } else { 0.0 };
            }
            (label.clone(), out)
        })
        .collect()
}

/// Occupancy summed over a team's players, normalized to a maximum of 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub width: i32,
    pub height: i32,
    /// Row-major, `height × width`, in the team's own coordinates.
    pub cells: Vec<f64>,
}

impl Heatmap {
    pub fn at(&self, x: i32, y: i32) -> f64 {
        self.cells[(y * self.width + x) as usize]
    }

    /// One CSV row per field row.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for y in 0..self.height {
            let row: Vec<String> = (0..self.width).map(|x| format!("{:.6}", self.at(x, y))).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Heatmap of the team `label` played for, over all its games.
pub fn position_heatmap(outcomes: &[MatchOutcome], label: &str) -> Option<Heatmap> {
    let first = outcomes.iter().find(|o| !o.sides_of(label).is_empty())?;
    let (w, h) = (first.width, first.height);
    let mut sum = vec![0.0f64; (w * h) as usize];
    for o in outcomes {
        let per_team = o.occupancy.len() / 2;
        for side in o.sides_of(label) {
            for grid in &o.occupancy[side * per_team..(side + 1) * per_team] {
                for (s, &c) in sum.iter_mut().zip(grid) {
                    *s += c as f64;
                }
            }
        }
    }
    let max = sum.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut sum {
            *v /= max;
        }
    }
    Some(Heatmap {
        width: w,
        height: h,
        cells: sum,
    })
}

/// Elo ratings recomputed from an outcome log, labels in order of first
/// appearance.
pub fn ratings_from_outcomes(outcomes: &[MatchOutcome], seed: u64) -> Vec<(String, f64)> {
    let mut labels: Vec<String> = Vec::new();
    for o in outcomes {
        for l in [&o.a, &o.b] {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    let ids: Vec<CheckpointId> = labels.iter().map(|l| CheckpointId::new(l.clone(), 0)).collect();
    let games = outcomes
        .iter()
        .map(|o| GameResult {
            a: CheckpointId::new(o.a.clone(), 0),
            b: CheckpointId::new(o.b.clone(), 0),
            score_a: o.score_a(),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rr = rate_round_robin(&ids, games, &mut rng);
    labels
        .into_iter()
        .zip(&ids)
        .map(|(l, id)| (l, rr.table.rating(id).unwrap_or(rr.table.initial)))
        .collect()
}

/// One ranked line of the judgment report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rank: usize,
    pub checkpoint: String,
    pub elo: f64,
    pub games: u32,
    pub wins: u32,
    pub draws: u32,
    pub losses: u32,
    pub goals_per_game: f64,
    pub conceded_per_game: f64,
    /// Own possession steps over all possession steps.
    pub possession_share: f64,
    pub behavior: [f64; 10],
    pub heatmap: String,
}

/// Ranked table from ratings and the raw outcome log. The final pick is left
/// to the reader.
pub fn judgment_report(ratings: &[(String, f64)], outcomes: &[MatchOutcome]) -> Vec<ReportRow> {
    let mut ranked: Vec<(String, f64)> = ratings.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let per: Vec<(String, Vec<BehaviorCounters>)> = ranked
        .iter()
        .map(|(l, _)| (l.clone(), counters_of(outcomes, l)))
        .collect();
    let behavior: BTreeMap<String, [f64; 10]> = behavior_stats(&per).into_iter().collect();
    ranked
        .iter()
        .enumerate()
        .map(|(i, (label, elo))| {
            let (mut w, mut d, mut l) = (0, 0, 0);
            let (mut gf, mut ga, mut own, mut opp) = (0u64, 0u64, 0u64, 0u64);
            for o in outcomes {
                for side in o.sides_of(label) {
                    match o.outcome_for(side) {
                        Outcome::Win => w += 1,
                        Outcome::Draw => d += 1,
                        Outcome::Loss => l += 1,
                    }
                    gf += o.goals[side] as u64;
                    ga += o.goals[1 - side] as u64;
                    own += o.counters[side].possession_steps_self as u64;
                    opp += o.counters[side].possession_steps_opponent as u64;
                }
            }
            let games = w + d + l;
            let per_game = |x: u64| if games == 0 { 0.0 } else { x as f64 / games as f64 };
            ReportRow {
                rank: i + 1,
                checkpoint: label.clone(),
                elo: *elo,
                games,
                wins: w,
                draws: d,
                losses: l,
                goals_per_game: per_game(gf),
                conceded_per_game: per_game(ga),
                possession_share: if own + opp == 0 { 0.0 } else { own as f64 / (own + opp) as f64 },
                behavior: behavior[label],
                heatmap: format!("heatmaps/{}.csv", label.replace(['#', '/'], "-")),
            }
        })
        .collect()
}

/// Plain-text rendering of the report.
pub fn render_report(rows: &[ReportRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<4} {:<24} {:>8} {:>6} {:>5} {:>5} {:>5} {:>7} {:>7} {:>6}",
        "rank", "checkpoint", "elo", "games", "win", "draw", "loss", "gf/g", "ga/g", "poss"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<4} {:<24} {:>8.1} {:>6} {:>5} {:>5} {:>5} {:>7.3} {:>7.3} {:>6.3}",
            r.rank,
            r.checkpoint,
            r.elo,
            r.games,
            r.wins,
            r.draws,
            r.losses,
            r.goals_per_game,
            r.conceded_per_game,
            r.possession_share
        );
    }
    let _ = writeln!(s, "\nbehavior distribution (normalized per behavior across candidates)");
    let _ = write!(s, "{:<24}", "checkpoint");
    for n in BehaviorCounters::NAMES {
        let _ = write!(s, " {:>8}", &n[..n.len().min(8)]);
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{:<24}", r.checkpoint);
        for v in r.behavior {
            let _ = write!(s, " {v:>8.3}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "\nheatmaps");
    for r in rows {
        let _ = writeln!(s, "{:<24} {}", r.checkpoint, r.heatmap);
    }
    s
}

/// CSV rendering of the report.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "rank",
        "checkpoint",
        "elo",
        "games",
        "wins",
        "draws",
        "losses",
        "goals_per_game",
        "conceded_per_game",
        "possession_share",
    ];
    header.extend(BehaviorCounters::NAMES);
    header.push("heatmap");
    w.write_record(&header).expect("in-memory csv");
    for r in rows {
        let mut rec = vec![
            r.rank.to_string(),
            r.checkpoint.clone(),
            format!("{:.3}", r.elo),
            r.games.to_string(),
            r.wins.to_string(),
            r.draws.to_string(),
            r.losses.to_string(),
            format!("{:.6}", r.goals_per_game),
            format!("{:.6}", r.conceded_per_game),
            format!("{:.6}", r.possession_share),
        ];
        rec.extend(r.behavior.iter().map(|v| format!("{v:.6}")));
        rec.push(r.heatmap.clone());
        w.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

/// Appends outcomes as JSON lines.
pub fn write_outcomes<W: Write>(w: &mut W, outcomes: &[MatchOutcome]) -> Result<(), EvalError> {
    for o in outcomes {
        serde_json::to_writer(&mut *w, o).map_err(|e| EvalError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_outcomes<R: BufRead>(r: R) -> Result<Vec<MatchOutcome>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let o: MatchOutcome = serde_json::from_str(&line).map_err(|e| EvalError::Log {
            line: i + 1,
            message: e.to_string(),
        })?;
        o.check().map_err(|message| EvalError::Log { line: i + 1, message })?;
        out.push(o);
    }
    Ok(out)
}
