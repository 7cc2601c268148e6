//! Training episodes: the learner controls one team (both in self-play) and
//! records a trajectory per controlled player.

use dis_core::matchmaking::Outcome;
use dis_core::netcore::{rnd_error, sample_action, NetError};
use dis_core::rlalgos::{Algorithm, Trajectory};
use dis_core::{CheckpointId, Net, Traj};
use minifootball::observation::{encode_global, encode_observation, HistoryStack};
use minifootball::rewards::compute_rewards;
use minifootball::rules::legal_action_mask;
use minifootball::state::{reset_match, reset_scenario};
use minifootball::step::{controlled_players, step};
use minifootball::{EnvConfig, EnvError, MatchState, RewardConfig, ScenarioSpec, Team};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actor::{derive_seed, Actor, Seat, Selection};

#[derive(Debug, thiserror::Error)]
pub enum RolloutError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("opponent unavailable: {0}")]
    Opponent(String),
}

/// Who the learner faces in one episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpponentChoice {
    SelfPlay,
    History { pool: String, checkpoint: CheckpointId },
    Scripted,
}

/// Everything that decides an episode apart from the networks.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodePlan {
    pub index: usize,
    pub seed: u64,
    pub opponent: OpponentChoice,
    pub learner_team: Team,
    pub scenario: Option<ScenarioSpec>,
}

/// Learner-side settings for collection.
#[derive(Clone, Copy, Debug)]
pub struct LearnerView<'a> {
    pub net: &'a Net,
    pub algorithm: Algorithm,
    pub rewards: &'a RewardConfig,
    pub history: usize,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub index: usize,
    pub opponent: OpponentChoice,
    pub trajectories: Vec<Traj>,
    pub samples: usize,
    pub steps: u32,
    /// Goals of the learner's team, then of the opponent's.
    pub goals: [u32; 2],
    pub outcome: Outcome,
}

/// Scenario copy trimmed to the configured team size.
pub fn fit_scenario(spec: &ScenarioSpec, cfg: &EnvConfig) -> ScenarioSpec {
    let mut s = spec.clone();
    s.offense.truncate(cfg.team_size);
    s.defense.truncate(cfg.team_size);
    s
}

/// Draws the side, the start (kickoff or scenario) and the seed of an
/// episode. The opponent is drawn by the caller from the same stream.
pub fn plan_start(rng: &mut ChaCha8Rng, cfg: &EnvConfig, scenario_mix: f64) -> (Team, Option<ScenarioSpec>, u64) {
    let team = if rng.gen_bool(0.5) { Team::Home } else { Team::Away };
    let scenario = if scenario_mix > 0.0 && rng.gen::<f64>() < scenario_mix {
        let all = ScenarioSpec::builtin();
        Some(fit_scenario(&all[rng.gen_range(0..all.len())], cfg))
    } else {
        None
    };
    (team, scenario, rng.gen())
}

struct Recorder {
    team: Team,
    stacks: Vec<HistoryStack>,
    trajs: Vec<Traj>,
}

impl Recorder {
    fn new(team: Team, n: usize, view: &LearnerView<'_>, masks: bool) -> Self {
        let trajs = (0..n)
            .map(|k| {
                let mut t = Trajectory::empty(k);
                if view.algorithm == Algorithm::Mappo {
                    t.critic_obs = Some(Vec::new());
                }
                if view.algorithm == Algorithm::RndPpo {
                    t.intrinsic_rewards = Some(Vec::new());
                    t.intrinsic_values_old = Some(Vec::new());
                }
                if masks {
                    t.masks = Some(Vec::new());
                }
                t
            })
            .collect();
        Self {
            team,
            stacks: (0..n).map(|_| HistoryStack::new(view.history)).collect(),
            trajs,
        }
    }

    fn intrinsic(view: &LearnerView<'_>, obs: &[f64]) -> Result<f64, NetError> {
        let r = view.net.rnd.as_ref().expect("RND-PPO nets carry predictor and target");
        rnd_error(&r.predictor, &r.target, obs)
    }

    fn act<R: Rng + ?Sized>(
        &mut self,
        s: &MatchState,
        cfg: &EnvConfig,
        view: &LearnerView<'_>,
        rng: &mut R,
    ) -> Result<Vec<usize>, NetError> {
        let ctrl = controlled_players(s, cfg, self.team);
        let global = (view.algorithm == Algorithm::Mappo).then(|| encode_global(s, cfg, self.team));
        let mut actions = Vec::with_capacity(ctrl.len());
        for (k, &p) in ctrl.iter().enumerate() {
            let obs = self.stacks[k].push(encode_observation(s, cfg, p));
            let t = &mut self.trajs[k];
            // the intrinsic reward of the previous step is the novelty of this state
            if view.algorithm == Algorithm::RndPpo && !t.is_empty() {
                let r = Self::intrinsic(view, &obs)?;
                t.intrinsic_rewards.as_mut().unwrap().push(r);
            }
            let mask = cfg.action_masks.then(|| legal_action_mask(s, cfg, p));
            let f = view.net.forward(&obs, global.as_deref())?;
            let (a, logp) = sample_action(&f.logits, mask.as_deref(), 1.0, rng)?;
            if let Some(m) = t.masks.as_mut() {
                m.push(mask.unwrap());
            }
            if let Some(c) = t.critic_obs.as_mut() {
                c.push(global.clone().unwrap());
            }
            if let Some(v) = t.intrinsic_values_old.as_mut() {
                v.push(f.intrinsic_value.unwrap_or(0.0));
            }
            t.obs.push(obs);
            t.actions.push(a);
            t.old_log_probs.push(logp);
            t.values_old.push(f.value);
            actions.push(a);
        }
        Ok(actions)
    }

    fn reward(&mut self, s: &MatchState, cfg: &EnvConfig, view: &LearnerView<'_>, events: &[minifootball::Event], done: bool) {
        let ctrl = controlled_players(s, cfg, self.team);
        let r = compute_rewards(events, view.rewards, &ctrl, self.team);
        for (t, r) in self.trajs.iter_mut().zip(r) {
            t.rewards.push(r);
            t.terminals.push(done);
        }
    }

    /// Closes the episode: intrinsic reward of the final state, then split.
    fn finish(mut self, s: &MatchState, cfg: &EnvConfig, view: &LearnerView<'_>, len: usize) -> Result<Vec<Traj>, NetError> {
        if view.algorithm == Algorithm::RndPpo {
            let ctrl = controlled_players(s, cfg, self.team);
            for (k, &p) in ctrl.iter().enumerate() {
                let mut peek = self.stacks[k].clone();
                let obs = peek.push(encode_observation(s, cfg, p));
                let r = Self::intrinsic(view, &obs)?;
                self.trajs[k].intrinsic_rewards.as_mut().unwrap().push(r);
            }
        }
        Ok(self.trajs.into_iter().flat_map(|t| t.split(len)).collect())
    }
}

/// Plays one complete episode. `opponent` is ignored for self-play.
pub fn run_episode(
    view: &LearnerView<'_>,
    opponent: Option<&Actor>,
    cfg: &EnvConfig,
    plan: &EpisodePlan,
    trajectory_length: usize,
) -> Result<EpisodeResult, RolloutError> {
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, &[0]));
    let mut act_rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, &[1]));
    let mut s = match &plan.scenario {
        Some(spec) => reset_scenario(cfg, spec, &mut env_rng)?,
        None => reset_match(cfg, &mut env_rng)?,
    };
    let me = plan.learner_team;
    let them = me.other();
    let n = cfg.controlled_per_team();
    let mut mine = Recorder::new(me, n, view, cfg.action_masks);
    let (mut mirror, mut seat) = match (&plan.opponent, opponent) {
        (OpponentChoice::SelfPlay, _) => (Some(Recorder::new(them, n, view, cfg.action_masks)), None),
        (_, Some(actor)) => (None, Some(Seat::new(actor.clone(), them, n))),
        (other, None) => return Err(RolloutError::Opponent(format!("{other:?}"))),
    };
    loop {
        let mut actions = [Vec::new(), Vec::new()];
        actions[me.index()] = mine.act(&s, cfg, view, &mut act_rng)?;
        actions[them.index()] = match (&mut mirror, &mut seat) {
            (Some(r), _) => r.act(&s, cfg, view, &mut act_rng)?,
            (None, Some(seat)) => {
                let ctrl = controlled_players(&s, cfg, them);
                seat.act(&s, cfg, &ctrl, Selection::Sample, &mut act_rng)?
            }
            (None, None) => unreachable!(),
        };
        let out = step(&mut s, cfg, &actions, &mut env_rng)?;
        mine.reward(&s, cfg, view, &out.events, out.done);
        if let Some(r) = mirror.as_mut() {
            r.reward(&s, cfg, view, &out.events, out.done);
        }
        if out.done {
            break;
        }
    }
    let mut trajectories = mine.finish(&s, cfg, view, trajectory_length)?;
    if let Some(r) = mirror {
        trajectories.extend(r.finish(&s, cfg, view, trajectory_length)?);
    }
    let goals = [s.score[me.index()], s.score[them.index()]];
    Ok(EpisodeResult {
        index: plan.index,
        opponent: plan.opponent.clone(),
        samples: trajectories.iter().map(Trajectory::len).sum(),
        trajectories,
        steps: s.steps_elapsed,
        goals,
        outcome: Outcome::from_goals(goals[0], goals[1]),
    })
}
