//! The league: agents, pools, episode scheduling, training, publication and
//! screening, persisted so a run can stop and continue exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use dis_core::checkpoint::CheckpointError;
use dis_core::elo::TopModelPool;
use dis_core::matchmaking::{Opponent, OpponentDistribution, Outcome, PairStats};
use dis_core::netcore::{AdamState, NetError};
use dis_core::pools::{CheckpointStore, PoolError, PoolRegistry, StoreError};
use dis_core::rlalgos::{TrainError, TrainReport};
use dis_core::{Checkpoint, CheckpointId, CheckpointMeta, F64Learner, Net, Traj};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actor::{derive_seed, Actor, Selection};
use crate::agents::{roster, AgentSetup};
use crate::config::{ConfigError, LeagueConfig, SchedulerMode};
use crate::evaluation::{merge_top_pool, screen_top3};
use crate::manifest::{write_atomic, AgentRecord, RunManifest, CONFIG_FILE, MANIFEST_FILE, MANIFEST_VERSION};
use crate::metrics::{CsvLog, EloRow, IterationRow, ELO_FILE, METRICS_FILE};
use crate::rollout::{plan_start, run_episode, EpisodePlan, EpisodeResult, LearnerView, OpponentChoice};

const STREAM_INIT: u64 = 1;
const STREAM_EPISODE: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_SCREEN: u64 = 4;
const STREAM_MERGE: u64 = 5;

/// Upper bound on episode attempts in one agent iteration.
pub const MAX_EPISODES_PER_ITERATION: usize = 100_000;
/// Failed episodes in a row after which collection gives up; the agent is
/// then treated as diverged.
pub const MAX_CONSECUTIVE_FAILURES: u32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum LeagueError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0} already holds a run; resume it instead")]
    Exists(PathBuf),
    #[error("run manifest: {0}")]
    Manifest(String),
    #[error("the main agent's configuration changed during the run")]
    MainConfigChanged,
    #[error("agent `{agent}` collected no usable batch after {attempts} episode attempts")]
    Stalled { agent: String, attempts: usize },
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> LeagueError + '_ {
    move |source| LeagueError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Test hook: returning true makes the worker running that episode panic.
pub type FaultHook = Arc<dyn Fn(&str, u64, usize) -> bool + Send + Sync>;

/// When to stop [`League::run`]. Both limits apply if set; neither set means
/// no iterations at all.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub iterations: Option<u64>,
    pub wall_clock: Option<Duration>,
}

impl Budget {
    pub fn iterations(n: u64) -> Self {
        Self {
            iterations: Some(n),
            wall_clock: None,
        }
    }
}

/// Live state of one agent.
pub struct AgentState {
    pub setup: AgentSetup,
    pub learner: F64Learner,
    pub stats: PairStats,
    pub iteration: u64,
    pub episodes: u64,
    pub samples: u64,
    pub next_seq: u64,
    pub last_checkpoint: Option<CheckpointId>,
    pub fail_streak: u32,
    pub rollbacks: u64,
    pub failed_episodes: u64,
    pub syncs: u64,
    pub top_pool: TopModelPool,
}

impl AgentState {
    pub fn name(&self) -> &'static str {
        self.setup.name()
    }
}

pub struct League {
    cfg: LeagueConfig,
    dir: PathBuf,
    run_id: String,
    main_hash: String,
    registry: PoolRegistry,
    store: CheckpointStore,
    agents: Vec<AgentState>,
    league_iteration: u64,
    creation_index: u64,
    metrics: CsvLog,
    elo: CsvLog,
    cache: Mutex<HashMap<CheckpointId, Arc<Net>>>,
    fault_hook: Option<FaultHook>,
    /// Persist after this many league iterations (0: only at the end of
    /// [`League::run`]).
    pub persist_every: u64,
}

/// Finite parameters and finite policy outputs on a kickoff observation.
fn healthy(net: &Net, cfg: &LeagueConfig) -> bool {
    let finite = net.trainable_slices().iter().all(|s| s.iter().all(|v| v.is_finite()));
    if !finite {
        return false;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let Ok(s) = minifootball::reset_match(&cfg.env, &mut rng) else {
        return true;
    };
    let mut obs = minifootball::encode_observation(&s, &cfg.env, 0);
    obs.resize(net.obs_dim(), 0.0);
    net.policy_logits(&obs).is_ok_and(|l| l.iter().all(|v| v.is_finite()))
}

fn learner_for(setup: &AgentSetup, cfg: &LeagueConfig, net: Net) -> Result<F64Learner, TrainError> {
    F64Learner::new(net, setup.algorithm, setup.ppo.clone(), cfg.rnd.clone())
}

impl League {
    /// Starts a run in `dir`. The main agent starts from `start` when given;
    /// policy explorers start from the main agent's parameters.
    pub fn create(cfg: LeagueConfig, dir: &Path, start: Option<&Net>) -> Result<Self, LeagueError> {
        cfg.validate()?;
        if dir.join(MANIFEST_FILE).exists() {
            return Err(LeagueError::Exists(dir.to_path_buf()));
        }
        fs::create_dir_all(dir).map_err(io_at(dir))?;
        let cfg_path = dir.join(CONFIG_FILE);
        write_atomic(&cfg_path, cfg.to_toml().as_bytes()).map_err(io_at(&cfg_path))?;

        let setups = roster(&cfg);
        let mut registry = PoolRegistry::new();
        let mut agents = Vec::with_capacity(setups.len());
        let mut main_net: Option<Net> = None;
        for (i, setup) in setups.into_iter().enumerate() {
            registry.register_agent(setup.name(), setup.kind.role(), cfg.pools.shmp_capacity)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_INIT, i as u64]));
            let net = match (setup.kind, &main_net) {
                (crate::agents::AgentKind::Main, _) => match start {
                    Some(n) => setup.adopt(n, &cfg)?,
                    None => setup.build_net(&cfg, &mut rng)?,
                },
                (crate::agents::AgentKind::PolicyExplorer(_), Some(m)) => setup.adopt(m, &cfg)?,
                _ => setup.build_net(&cfg, &mut rng)?,
            };
            if i == 0 {
                main_net = Some(net.clone());
            }
            let learner = learner_for(&setup, &cfg, net)?;
            agents.push(AgentState {
                setup,
                learner,
                stats: PairStats::new(cfg.sampling.decay),
                iteration: 0,
                episodes: 0,
                samples: 0,
                next_seq: 0,
                last_checkpoint: None,
                fail_streak: 0,
                rollbacks: 0,
                failed_episodes: 0,
                syncs: 0,
                top_pool: TopModelPool::default(),
            });
        }
        let metrics_path = dir.join(METRICS_FILE);
        let elo_path = dir.join(ELO_FILE);
        let league = Self {
            run_id: format!("{}-{}", cfg.hash(), cfg.seed),
            main_hash: cfg.main_agent_hash(),
            dir: dir.to_path_buf(),
            store: CheckpointStore::new(dir),
            registry,
            agents,
            league_iteration: 0,
            creation_index: 0,
            metrics: CsvLog::open(&metrics_path, Some(0)).map_err(io_at(&metrics_path))?,
            elo: CsvLog::open(&elo_path, Some(0)).map_err(io_at(&elo_path))?,
            cache: Mutex::new(HashMap::new()),
            fault_hook: None,
            persist_every: 1,
            cfg,
        };
        league.persist()?;
        Ok(league)
    }

    /// Continues the run stored in `dir`.
    pub fn resume(dir: &Path) -> Result<Self, LeagueError> {
        let cfg = LeagueConfig::load(&dir.join(CONFIG_FILE))?;
        let m = RunManifest::load(dir).map_err(|e| LeagueError::Manifest(format!("{e:#}")))?;
        if m.config_hash != cfg.hash() {
            return Err(LeagueError::Manifest(format!(
                "{} no longer matches the configuration the run started with",
                CONFIG_FILE
            )));
        }
        if m.main_config_hash != cfg.main_agent_hash() {
            return Err(LeagueError::MainConfigChanged);
        }
        let (registry, warnings) = PoolRegistry::load(dir)?;
        for w in warnings {
            log::warn!("{w}");
        }
        let mut agents = Vec::new();
        for setup in roster(&cfg) {
            let rec = m
                .agents
                .iter()
                .find(|r| r.name == setup.name())
                .ok_or_else(|| LeagueError::Manifest(format!("agent `{}` missing from the manifest", setup.name())))?;
            let net = Checkpoint::load(&dir.join(&rec.learner_net))?.net;
            let adam_path = dir.join(&rec.learner_optimizer);
            let adam: AdamState<f64> = serde_json::from_slice(&fs::read(&adam_path).map_err(io_at(&adam_path))?)
                .map_err(|e| LeagueError::Manifest(format!("{}: {e}", adam_path.display())))?;
            let mut learner = learner_for(&setup, &cfg, net)?;
            learner.adam = adam;
            learner.updates = rec.updates;
            learner.dropped_minibatches = rec.dropped_minibatches;
            learner.intrinsic_stats = rec.intrinsic_stats.clone();
            agents.push(AgentState {
                setup,
                learner,
                stats: rec.pair_stats.clone(),
                iteration: rec.iteration,
                episodes: rec.episodes,
                samples: rec.samples,
                next_seq: rec.next_seq,
                last_checkpoint: rec.last_checkpoint.clone(),
                fail_streak: rec.fail_streak,
                rollbacks: rec.rollbacks,
                failed_episodes: rec.failed_episodes,
                syncs: rec.syncs,
                top_pool: rec.top_pool.clone(),
            });
        }
        let metrics_path = dir.join(&m.metrics);
        let elo_path = dir.join(&m.elo);
        Ok(Self {
            run_id: m.run_id,
            main_hash: m.main_config_hash,
            dir: dir.to_path_buf(),
            store: CheckpointStore::new(dir),
            registry,
            agents,
            league_iteration: m.league_iteration,
            creation_index: m.creation_index,
            metrics: CsvLog::open(&metrics_path, Some(m.metrics_rows)).map_err(io_at(&metrics_path))?,
            elo: CsvLog::open(&elo_path, Some(m.elo_rows)).map_err(io_at(&elo_path))?,
            cache: Mutex::new(HashMap::new()),
            fault_hook: None,
            persist_every: 1,
            cfg,
        })
    }

    pub fn with_fault_hook(mut self, hook: FaultHook) -> Self {
        self.fault_hook = Some(hook);
        self
    }

    pub fn config(&self) -> &LeagueConfig {
        &self.cfg
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn registry(&self) -> &PoolRegistry {
        &self.registry
    }

    pub fn store(&self) -> &CheckpointStore {
        &self.store
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn league_iteration(&self) -> u64 {
        self.league_iteration
    }

    pub fn main(&self) -> &AgentState {
        &self.agents[0]
    }

    /// Runs agent iterations until the budget is spent, then persists.
    /// Returns the number of iterations run.
    pub fn run(&mut self, budget: Budget) -> Result<u64, LeagueError> {
        let started = Instant::now();
        let mut done = 0;
        loop {
            let out_of_iterations = budget.iterations.map_or(budget.wall_clock.is_none(), |n| done >= n);
            let out_of_time = budget.wall_clock.is_some_and(|w| started.elapsed() >= w);
            if out_of_iterations || out_of_time {
                break;
            }
            self.step()?;
            done += 1;
            if self.persist_every > 0 && self.league_iteration % self.persist_every == 0 {
                self.persist()?;
            }
        }
        self.persist()?;
        if self.cfg.main_agent_hash() != self.main_hash {
            return Err(LeagueError::MainConfigChanged);
        }
        Ok(done)
    }

    /// The agent furthest behind its episode share; ties go to the earlier
    /// agent in the roster.
    pub fn next_agent(&self) -> usize {
        let mut best = 0;
        let mut best_key = f64::INFINITY;
        for (i, a) in self.agents.iter().enumerate() {
            if a.setup.share <= 0.0 {
                continue;
            }
            let key = a.episodes as f64 / a.setup.share;
            if key < best_key {
                best = i;
                best_key = key;
            }
        }
        best
    }

    /// One iteration of the next scheduled agent.
    pub fn step(&mut self) -> Result<(), LeagueError> {
        let a = self.next_agent();
        self.iterate(a)
    }

    fn iterate(&mut self, a: usize) -> Result<(), LeagueError> {
        if self.agents[a].last_checkpoint.is_none() {
            self.publish(a)?;
        }
        let name = self.agents[a].name();
        let views = self.registry.views(name, &self.cfg.pools.enabled)?;
        let dist = OpponentDistribution::build(&views, &self.agents[a].stats, &self.cfg.sampling.sampler());
        let mut rolled_back = false;
        let (results, failed) = match self.collect(a, &dist) {
            Err(LeagueError::Stalled { .. }) if self.agents[a].last_checkpoint.is_some() => {
                log::warn!("{name}: rollouts keep failing; treating the agent as diverged");
                self.rollback(a)?;
                rolled_back = true;
                self.collect(a, &dist)?
            }
            other => other?,
        };

        let mut row = IterationRow {
            league_iteration: self.league_iteration,
            agent: name.to_string(),
            iteration: self.agents[a].iteration,
            failed_episodes: failed,
            rolled_back,
            ..IterationRow::default()
        };
        let mut trajectories: Vec<Traj> = Vec::new();
        let mut samples = 0u64;
        {
            let ag = &mut self.agents[a];
            for r in &results {
                if let OpponentChoice::History { checkpoint, .. } = &r.opponent {
                    ag.stats.record(checkpoint, r.outcome);
                }
            }
            for r in results {
                samples += r.samples as u64;
                if r.opponent == OpponentChoice::SelfPlay {
                    row.self_play_episodes += 1;
                } else {
                    match r.outcome {
                        Outcome::Win => row.wins += 1,
                        Outcome::Draw => row.draws += 1,
                        Outcome::Loss => row.losses += 1,
                    }
                    row.goals_for += r.goals[0];
                    row.goals_against += r.goals[1];
                }
                row.episodes += 1;
                trajectories.extend(r.trajectories);
            }
            let games = (row.wins + row.draws + row.losses) as f64;
            if games > 0.0 {
                row.win_rate = row.wins as f64 / games;
                row.draw_rate = row.draws as f64 / games;
                row.loss_rate = row.losses as f64 / games;
            }
            ag.episodes += row.episodes;
            ag.samples += samples;
            ag.failed_episodes += failed as u64;
            row.samples = samples;
        }

        let report = self.train(a, &trajectories)?;
        drop(trajectories);
        if let Some(rep) = &report {
            row.policy_loss = rep.losses.policy_loss;
            row.value_loss = rep.losses.value_loss;
            row.entropy = rep.losses.entropy;
            row.intrinsic_value_loss = rep.losses.intrinsic_value_loss;
            row.prediction_loss = rep.losses.prediction_loss;
            row.total_loss = rep.losses.total;
            row.grad_norm = rep.grad_norm;
            row.entropy_coefficient = rep.entropy_coefficient;
            row.minibatches_dropped = rep.minibatches_dropped as u32;
        } else {
            row.entropy_coefficient = self.agents[a].learner.entropy_coefficient();
        }
        self.agents[a].iteration += 1;
        let it = self.agents[a].iteration;
        let pools = &self.cfg.pools;
        let (publish, screen) = (it % pools.publish_every == 0, it % pools.screen_every == 0);
        if publish {
            self.publish(a)?;
        }
        if self.agents[a].fail_streak >= self.cfg.schedule.divergence_streak.max(1) {
            self.rollback(a)?;
            row.rolled_back = true;
        }
        let mut elo_rows = Vec::new();
        if screen {
            elo_rows = self.screen(a)?;
        }
        let sync = self.cfg.agents.explorer_sync_every;
        if sync > 0 && it % sync == 0 && matches!(self.agents[a].setup.kind, crate::agents::AgentKind::PolicyExplorer(_)) {
            self.sync_from_main(a)?;
        }
        row.top_elo = self.agents[a].top_pool.members().first().map(|c| c.rating());
        self.metrics
            .append(&[row])
            .map_err(io_at(&self.dir.join(METRICS_FILE)))?;
        self.elo.append(&elo_rows).map_err(io_at(&self.dir.join(ELO_FILE)))?;
        self.league_iteration += 1;
        Ok(())
    }

    fn train(&mut self, a: usize, trajectories: &[Traj]) -> Result<Option<TrainReport>, LeagueError> {
        let seed = derive_seed(self.cfg.seed, &[STREAM_TRAIN, a as u64, self.agents[a].iteration]);
        let ag = &mut self.agents[a];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match ag.learner.train_step(trajectories, &mut rng) {
            Ok(rep) => {
                let finite = ag
                    .learner
                    .net
                    .trainable_slices()
                    .iter()
                    .all(|s| s.iter().all(|v| v.is_finite()));
                if finite && rep.minibatches_dropped == 0 {
                    ag.fail_streak = 0;
                } else {
                    ag.fail_streak += 1;
                }
                Ok(Some(rep))
            }
            Err(TrainError::NonFiniteBatch) => {
                log::warn!("{}: iteration {} produced no finite update", ag.name(), ag.iteration);
                ag.fail_streak += 1;
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Restores the last published parameters with a fresh optimizer.
    fn rollback(&mut self, a: usize) -> Result<(), LeagueError> {
        let Some(id) = self.agents[a].last_checkpoint.clone() else {
            return Ok(());
        };
        let net = (*self.net_for(&id)?).clone();
        let ag = &mut self.agents[a];
        log::warn!("{}: {} failed updates in a row; rolling back to {id}", ag.name(), ag.fail_streak);
        let mut learner = learner_for(&ag.setup, &self.cfg, net)?;
        learner.updates = ag.learner.updates;
        learner.dropped_minibatches = ag.learner.dropped_minibatches;
        learner.intrinsic_stats = ag.learner.intrinsic_stats.clone();
        ag.learner = learner;
        ag.fail_streak = 0;
        ag.rollbacks += 1;
        Ok(())
    }

    /// Freezes the agent's current parameters into the store and its pools.
    /// Skips publication, and counts a failed update, when the parameters no
    /// longer give finite outputs.
    fn publish(&mut self, a: usize) -> Result<Option<CheckpointId>, LeagueError> {
        if self.agents[a].last_checkpoint.is_some() && !healthy(&self.agents[a].learner.net, &self.cfg) {
            let ag = &mut self.agents[a];
            log::warn!("{}: parameters give non-finite outputs; not published", ag.name());
            ag.fail_streak += 1;
            return Ok(None);
        }
        let ag = &mut self.agents[a];
        let id = CheckpointId::new(ag.name(), ag.next_seq);
        let meta = CheckpointMeta {
            id: id.clone(),
            role: ag.setup.kind.role(),
            kind: ag.setup.kind.label().to_string(),
            algorithm: ag.setup.algorithm,
            training_step: ag.learner.updates,
            iteration: ag.iteration,
            creation_index: self.creation_index,
        };
        self.store.save(&Checkpoint::new(meta.clone(), &ag.learner.net))?;
        let name = ag.name();
        let lhmp_due = ag.iteration > 0 && ag.iteration % self.cfg.pools.lhmp_every == 0;
        ag.next_seq += 1;
        ag.last_checkpoint = Some(id.clone());
        let net = Arc::new(ag.learner.net.clone());
        self.creation_index += 1;
        self.registry.push_short_term(name, meta)?;
        self.registry.snapshot_long_term(name, &id, lhmp_due)?;
        let mut cache = self.cache.lock().expect("cache lock");
        cache.insert(id.clone(), net);
        let live = self.live_checkpoints();
        cache.retain(|k, _| live.contains(k));
        Ok(Some(id))
    }

    fn live_checkpoints(&self) -> BTreeSet<CheckpointId> {
        let mut s = self.registry.referenced();
        for a in &self.agents {
            s.extend(a.last_checkpoint.iter().cloned());
            s.extend(a.top_pool.members().iter().map(|c| c.id().clone()));
        }
        s
    }

    /// Round robin over the newest short-term entries, superior-pool
    /// admission of the best three, and a merge into the top pool.
    fn screen(&mut self, a: usize) -> Result<Vec<EloRow>, LeagueError> {
        let name = self.agents[a].name();
        let shmp = &self.registry.agent(name)?.shmp;
        let mut recent: Vec<CheckpointId> = shmp.entries().rev().take(self.cfg.pools.screen_candidates).cloned().collect();
        recent.reverse();
        let mut entrants = Vec::new();
        for id in recent {
            let recency = self.registry.meta(&id).map_or(0, |m| m.creation_index);
            match self.net_for(&id) {
                Ok(net) => entrants.push((id, Actor::from_net(net, &self.cfg.env), recency)),
                Err(e) => log::warn!("screening skips {id}: {e}"),
            }
        }
        if entrants.is_empty() {
            return Ok(Vec::new());
        }
        let selection = if self.cfg.evaluation.greedy {
            Selection::Greedy
        } else {
            Selection::Sample
        };
        let workers = match self.cfg.schedule.mode {
            SchedulerMode::Threaded => self.cfg.schedule.workers,
            SchedulerMode::Serialized => 1,
        };
        let it = self.agents[a].iteration;
        let gpp = self.cfg.pools.games_per_pair;
        let seed = derive_seed(self.cfg.seed, &[STREAM_SCREEN, a as u64, it]);
        let (t, certs) = screen_top3(&entrants, gpp, &self.cfg.env, selection, seed, workers);
        let mut rows = Vec::new();
        for id in &t.ids {
            rows.push(EloRow {
                league_iteration: self.league_iteration,
                agent: name.to_string(),
                round: "screen".into(),
                checkpoint: id.to_string(),
                rating: t.rating.table.rating(id).unwrap_or(t.rating.table.initial),
                win_rate: t.rating.win_rate(id),
                rank: certs.iter().position(|c| c.id() == id),
            });
        }
        for c in &certs {
            if let Err(e) = self.registry.admit_superior(name, c) {
                log::warn!("superior admission of {} rejected: {e}", c.id());
            }
        }
        let mut actors: HashMap<CheckpointId, Actor> = entrants.into_iter().map(|(id, act, _)| (id, act)).collect();
        for m in self.agents[a].top_pool.members() {
            if !actors.contains_key(m.id()) {
                match self.net_for(m.id()) {
                    Ok(net) => {
                        actors.insert(m.id().clone(), Actor::from_net(net, &self.cfg.env));
                    }
                    Err(e) => log::warn!("top-pool member {} unavailable: {e}", m.id()),
                }
            }
        }
        let seed = derive_seed(self.cfg.seed, &[STREAM_MERGE, a as u64, it]);
        let rr = merge_top_pool(
            &mut self.agents[a].top_pool,
            &certs,
            &actors,
            gpp,
            &self.cfg.env,
            selection,
            seed,
            workers,
        );
        for (rank, m) in self.agents[a].top_pool.members().iter().enumerate() {
            rows.push(EloRow {
                league_iteration: self.league_iteration,
                agent: name.to_string(),
                round: "top_pool".into(),
                checkpoint: m.id().to_string(),
                rating: m.rating(),
                win_rate: rr.win_rate(m.id()),
                rank: Some(rank),
            });
        }
        Ok(rows)
    }

    /// Copies the main agent's latest published parameters into a policy
    /// explorer. The explorer keeps its own settings; its optimizer restarts.
    fn sync_from_main(&mut self, a: usize) -> Result<(), LeagueError> {
        let Some(id) = self.agents[0].last_checkpoint.clone() else {
            return Ok(());
        };
        let main = self.net_for(&id)?;
        let ag = &mut self.agents[a];
        let net = ag.setup.adopt(&main, &self.cfg)?;
        let mut learner = learner_for(&ag.setup, &self.cfg, net)?;
        learner.updates = ag.learner.updates;
        learner.dropped_minibatches = ag.learner.dropped_minibatches;
        ag.learner = learner;
        ag.syncs += 1;
        log::info!("{} synchronized from {id}", ag.name());
        Ok(())
    }

    /// Published network by id, loaded once and then shared.
    pub fn net_for(&self, id: &CheckpointId) -> Result<Arc<Net>, StoreError> {
        if let Some(n) = self.cache.lock().expect("cache lock").get(id) {
            return Ok(n.clone());
        }
        let net = Arc::new(self.store.load(id)?.net);
        self.cache.lock().expect("cache lock").insert(id.clone(), net.clone());
        Ok(net)
    }

    fn plan(&self, a: usize, dist: &OpponentDistribution, i: usize) -> EpisodePlan {
        let ag = &self.agents[a];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.cfg.seed,
            &[STREAM_EPISODE, a as u64, ag.iteration, i as u64],
        ));
        let (learner_team, scenario, seed) = plan_start(&mut rng, &self.cfg.env, self.cfg.scenario_mix);
        let rate = self.cfg.sampling.builtin_opponent_rate;
        let opponent = if rate > 0.0 && rng.gen::<f64>() < rate {
            OpponentChoice::Scripted
        } else {
            match dist.sample(&mut rng) {
                Opponent::SelfPlay => OpponentChoice::SelfPlay,
                Opponent::History { pool, checkpoint } => OpponentChoice::History { pool, checkpoint },
            }
        };
        EpisodePlan {
            index: i,
            seed,
            opponent,
            learner_team,
            scenario,
        }
    }

    /// Plays episode `i` of agent `a`'s current iteration. Errors and panics
    /// come back as a message; the episode is then discarded.
    fn episode(&self, a: usize, dist: &OpponentDistribution, i: usize) -> Result<EpisodeResult, String> {
        let plan = self.plan(a, dist, i);
        let ag = &self.agents[a];
        let opponent = match &plan.opponent {
            OpponentChoice::SelfPlay => None,
            OpponentChoice::Scripted => Some(Actor::Scripted),
            OpponentChoice::History { checkpoint, .. } => {
                let net = self.net_for(checkpoint).map_err(|e| e.to_string())?;
                Some(Actor::from_net(net, &self.cfg.env))
            }
        };
        let view = LearnerView {
            net: &ag.learner.net,
            algorithm: ag.setup.algorithm,
            rewards: &ag.setup.rewards,
            history: ag.setup.history,
        };
        let res = catch_unwind(AssertUnwindSafe(|| {
            if let Some(hook) = &self.fault_hook {
                if hook(ag.name(), ag.iteration, i) {
                    panic!("injected fault in episode {i}");
                }
            }
            run_episode(&view, opponent.as_ref(), &self.cfg.env, &plan, ag.setup.ppo.trajectory_length)
        }));
        match res {
            Ok(Ok(r)) => Ok(r),
            Ok(Err(e)) => Err(e.to_string()),
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "worker panicked".into())),
        }
    }

    /// Episodes in index order until the batch is full, plus the number of
    /// discarded episodes among them. Threaded collection returns exactly
    /// what serialized collection would.
    fn collect(&self, a: usize, dist: &OpponentDistribution) -> Result<(Vec<EpisodeResult>, u32), LeagueError> {
        let batch = self.agents[a].setup.ppo.batch_size;
        let name = self.agents[a].name();
        let mut out = Vec::new();
        let mut samples = 0usize;
        let mut failed = 0u32;
        let mut streak = 0u32;
        // true once collection is over, either full or given up
        let mut accept = |i: usize, r: Result<EpisodeResult, String>| match r {
            Ok(r) => {
                streak = 0;
                samples += r.samples;
                out.push(r);
                samples >= batch
            }
            Err(e) => {
                log::warn!("{name}: episode {i} discarded: {e}");
                failed += 1;
                streak += 1;
                streak >= MAX_CONSECUTIVE_FAILURES
            }
        };
        match self.cfg.schedule.mode {
            SchedulerMode::Serialized => {
                for i in 0..MAX_EPISODES_PER_ITERATION {
                    if accept(i, self.episode(a, dist, i)) {
                        break;
                    }
                }
            }
            SchedulerMode::Threaded => {
                let next = AtomicUsize::new(0);
                let stop = AtomicBool::new(false);
                let (tx, rx) = crossbeam::channel::bounded(self.cfg.schedule.queue_capacity);
                crossbeam::scope(|sc| {
                    for _ in 0..self.cfg.schedule.workers {
                        let tx = tx.clone();
                        let (next, stop) = (&next, &stop);
                        sc.spawn(move |_| loop {
                            if stop.load(Ordering::SeqCst) {
                                break;
                            }
                            let i = next.fetch_add(1, Ordering::SeqCst);
                            if i >= MAX_EPISODES_PER_ITERATION {
                                break;
                            }
                            if tx.send((i, self.episode(a, dist, i))).is_err() {
                                break;
                            }
                        });
                    }
                    drop(tx);
                    let mut pending = BTreeMap::new();
                    let mut want = 0;
                    'recv: for (i, r) in rx.iter() {
                        pending.insert(i, r);
                        while let Some(r) = pending.remove(&want) {
                            want += 1;
                            if accept(want - 1, r) {
                                break 'recv;
                            }
                        }
                    }
                    stop.store(true, Ordering::SeqCst);
                    drop(rx);
                })
                .expect("collection worker panicked outside an episode");
            }
        }
        if samples < batch {
            return Err(LeagueError::Stalled {
                agent: name.into(),
                attempts: out.len() + failed as usize,
            });
        }
        Ok((out, failed))
    }

    /// Writes pools, learner state and the manifest. The manifest goes last,
    /// so a crash leaves the previous consistent state in place.
    pub fn persist(&self) -> Result<(), LeagueError> {
        self.registry.persist(&self.dir)?;
        let mut records = Vec::new();
        for ag in &self.agents {
            let net_rel = format!("state/{}.ckpt", ag.name());
            let adam_rel = format!("state/{}.adam.json", ag.name());
            let meta = CheckpointMeta {
                id: CheckpointId::new(ag.name(), ag.next_seq),
                role: ag.setup.kind.role(),
                kind: ag.setup.kind.label().to_string(),
                algorithm: ag.setup.algorithm,
                training_step: ag.learner.updates,
                iteration: ag.iteration,
                creation_index: self.creation_index,
            };
            let net_path = self.dir.join(&net_rel);
            fs::create_dir_all(net_path.parent().expect("state dir")).map_err(io_at(&net_path))?;
            Checkpoint::new(meta, &ag.learner.net).save(&net_path)?;
            let adam_path = self.dir.join(&adam_rel);
            let adam = serde_json::to_vec(&ag.learner.adam).expect("optimizer state serializes");
            write_atomic(&adam_path, &adam).map_err(io_at(&adam_path))?;
            records.push(AgentRecord {
                name: ag.name().to_string(),
                kind: ag.setup.kind,
                iteration: ag.iteration,
                episodes: ag.episodes,
                samples: ag.samples,
                next_seq: ag.next_seq,
                last_checkpoint: ag.last_checkpoint.clone(),
                fail_streak: ag.fail_streak,
                rollbacks: ag.rollbacks,
                failed_episodes: ag.failed_episodes,
                syncs: ag.syncs,
                pair_stats: ag.stats.clone(),
                top_pool: ag.top_pool.clone(),
                learner_net: net_rel,
                learner_optimizer: adam_rel,
                updates: ag.learner.updates,
                dropped_minibatches: ag.learner.dropped_minibatches,
                intrinsic_stats: ag.learner.intrinsic_stats.clone(),
            });
        }
        let manifest = RunManifest {
            version: MANIFEST_VERSION,
            run_id: self.run_id.clone(),
            config_hash: self.cfg.hash(),
            main_config_hash: self.main_hash.clone(),
            league_iteration: self.league_iteration,
            creation_index: self.creation_index,
            pools: dis_core::pools::MANIFEST_FILE.into(),
            metrics: METRICS_FILE.into(),
            metrics_rows: self.metrics.rows(),
            elo: ELO_FILE.into(),
            elo_rows: self.elo.rows(),
            agents: records,
        };
        manifest.save(&self.dir).map_err(io_at(&self.dir.join(MANIFEST_FILE)))
    }

    /// Checkpoints the run still needs: pool entries, each agent's latest
    /// publication and top-pool members.
    pub fn keep_set(&self) -> BTreeSet<CheckpointId> {
        self.live_checkpoints()
    }
}
