//! Batch preparation, loss/gradient evaluation and the optimizer pass shared
//! by dual-clip PPO, RND-PPO and MAPPO.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gae::{compute_gae, standardize};
use super::losses::{dual_clip_term, dual_clip_term_grad, rnd_combined_advantage, rnd_total_loss, RndLossParts, RndLossWeights};
use super::trajectory::Trajectory;
use crate::netcore::{masked_log_softmax, AdamConfig, AdamState, Gradients, HeadGradients, NetError, PolicyValueNet};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    RndPpo,
    Mappo,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::RndPpo => "rnd_ppo",
            Algorithm::Mappo => "mappo",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "ppo" => Some(Algorithm::Ppo),
            "rnd_ppo" => Some(Algorithm::RndPpo),
            "mappo" => Some(Algorithm::Mappo),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub value_loss_weight: f64,
    pub entropy_coefficient: f64,
    /// When set, the entropy coefficient decays linearly to this value.
    pub entropy_final: Option<f64>,
    /// Number of optimizer passes over which the decay runs.
    pub entropy_anneal_updates: u64,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub trajectory_length: usize,
    pub sample_reuse: f64,
    pub normalize_advantages: bool,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            eta: 3.0,
            gamma: 0.9995,
            lambda: 0.95,
            value_loss_weight: 0.5,
            entropy_coefficient: 0.01,
            entropy_final: None,
            entropy_anneal_updates: 0,
            batch_size: 4096,
            minibatch_size: 1024,
            trajectory_length: 128,
            sample_reuse: 1.0,
            normalize_advantages: true,
            adam: AdamConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.eta > 1.0 + self.epsilon) {
            return bad("eta must exceed 1 + epsilon");
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(&format!("{name} must lie in (0, 1]"));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("minibatch_size", self.minibatch_size),
            ("trajectory_length", self.trajectory_length),
        ] {
            if v == 0 {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.sample_reuse > 0.0 && self.sample_reuse <= 2.0) {
            return bad("sample_reuse must lie in (0, 2]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RndConfig {
    pub intrinsic_gamma: f64,
    pub intrinsic_coefficient: f64,
    pub extrinsic_coefficient: f64,
    pub weights: RndLossWeights,
    /// Divide intrinsic rewards by their running standard deviation.
    pub normalize_intrinsic: bool,
}

impl Default for RndConfig {
    fn default() -> Self {
        Self {
            intrinsic_gamma: 0.99,
            intrinsic_coefficient: 8.0,
            extrinsic_coefficient: 2.0,
            weights: RndLossWeights::default(),
            normalize_intrinsic: true,
        }
    }
}

/// Loss components of one optimizer pass (means over the applied minibatches).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub intrinsic_value_loss: f64,
    pub prediction_loss: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn is_finite(&self) -> bool {
        [
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.intrinsic_value_loss,
            self.prediction_loss,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrainError {
    #[error("training configuration error: {0}")]
    Config(String),
    #[error("malformed trajectory: {0}")]
    Trajectory(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("every minibatch produced a non-finite loss or gradient")]
    NonFiniteBatch,
}

/// One training example after advantage estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub player: usize,
    pub obs: Vec<T>,
    pub critic_obs: Option<Vec<T>>,
    pub mask: Option<Vec<bool>>,
    pub action: usize,
    pub old_log_prob: T,
    /// Advantage fed to the policy loss (combined and standardized as configured).
    pub advantage: T,
    /// `G_t = V_old(s_t) + Â_t`.
    pub ret: T,
    /// `G^rnd_t = V^rnd_old(s_t) + Â^i_t`.
    pub intrinsic_ret: Option<T>,
}

/// Running mean/variance (Welford, batched merge).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningMoments {
    pub fn update(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.count += 1.0;
            let d = x - self.mean;
            self.mean += d / self.count;
            self.m2 += d * (x - self.mean);
        }
    }

    pub fn std(&self) -> f64 {
        if self.count < 2.0 {
            1.0
        } else {
            (self.m2 / self.count).sqrt()
        }
    }
}

/// Turns trajectories into samples: extrinsic GAE (episodic), intrinsic GAE
/// (non-episodic) for RND-PPO, advantage mixing and per-batch standardization.
pub fn prepare_batch<T: Scalar>(
    trajectories: &[Trajectory<T>],
    algorithm: Algorithm,
    ppo: &PpoConfig,
    rnd: &RndConfig,
    intrinsic_scale: T,
) -> Result<Vec<Sample<T>>, TrainError> {
    let mut samples = Vec::new();
    let mut advs = Vec::new();
    for (k, tr) in trajectories.iter().enumerate() {
        if !tr.is_consistent() {
            return Err(TrainError::Trajectory(format!("trajectory {k} has ragged sequences")));
        }
        if algorithm == Algorithm::Mappo && tr.critic_obs.is_none() {
            return Err(TrainError::Trajectory(format!("trajectory {k} lacks global observations")));
        }
        let (ext_adv, ext_ret) = compute_gae(
            &tr.rewards,
            &tr.values_old,
            &tr.terminals,
            tr.bootstrap_value,
            T::lit(ppo.gamma),
            T::lit(ppo.lambda),
        );
        let (adv, int_ret) = if algorithm == Algorithm::RndPpo {
            let (ir, iv) = match (&tr.intrinsic_rewards, &tr.intrinsic_values_old) {
                (Some(r), Some(v)) => (r, v),
                _ => return Err(TrainError::Trajectory(format!("trajectory {k} lacks intrinsic streams"))),
            };
            let scaled: Vec<T> = ir.iter().map(|&r| r / intrinsic_scale).collect();
            let never = vec![false; tr.len()];
            let (int_adv, int_ret) = compute_gae(
                &scaled,
                iv,
                &never,
                tr.bootstrap_intrinsic_value,
                T::lit(rnd.intrinsic_gamma),
                T::lit(ppo.lambda),
            );
            let mixed = rnd_combined_advantage(
                &ext_adv,
                &int_adv,
                T::lit(rnd.extrinsic_coefficient),
                T::lit(rnd.intrinsic_coefficient),
            );
            (mixed, Some(int_ret))
        } else {
            (ext_adv, None)
        };
        for t in 0..tr.len() {
            advs.push(adv[t]);
            samples.push(Sample {
                player: tr.player,
                obs: tr.obs[t].clone(),
                critic_obs: tr.critic_obs.as_ref().map(|c| c[t].clone()),
                mask: tr.masks.as_ref().map(|m| m[t].clone()),
                action: tr.actions[t],
                old_log_prob: tr.old_log_probs[t],
                advantage: adv[t],
                ret: ext_ret[t],
                intrinsic_ret: int_ret.as_ref().map(|r| r[t]),
            });
        }
    }
    if ppo.normalize_advantages {
        standardize(&mut advs);
        for (s, a) in samples.iter_mut().zip(advs) {
            s.advantage = a;
        }
    }
    Ok(samples)
}

/// Loss settings that stay fixed within one optimizer pass.
#[derive(Clone, Debug)]
pub struct LossSettings<'a> {
    pub algorithm: Algorithm,
    pub ppo: &'a PpoConfig,
    pub rnd: &'a RndConfig,
    pub entropy_coefficient: f64,
}

/// Loss of a minibatch and, when `grads` is given, its parameter gradient.
///
/// total = L_p + w_v·L_v + w_iv·L^rnd_v + w_pre·L^rnd_pre − c_ent·H, where the
/// RND terms are zero for the other algorithms and, for MAPPO, L_p is the mean
/// of per-player policy losses.
pub fn minibatch_loss<T: Scalar>(
    net: &PolicyValueNet<T>,
    samples: &[&Sample<T>],
    settings: &LossSettings<'_>,
    mut grads: Option<&mut Gradients<T>>,
) -> Result<LossBreakdown, NetError> {
    let n = samples.len();
    if n == 0 {
        return Ok(LossBreakdown::default());
    }
    let eps = T::lit(settings.ppo.epsilon);
    let eta = T::lit(settings.ppo.eta);
    let vw = T::lit(settings.ppo.value_loss_weight);
    let ent = T::lit(settings.entropy_coefficient);
    let w_iv = T::lit(settings.rnd.weights.intrinsic_value);
    let w_pre = T::lit(settings.rnd.weights.prediction);
    let inv_n = T::one() / T::from_usize(n).unwrap();
    let is_rnd = settings.algorithm == Algorithm::RndPpo;

    // Per-sample policy weight: 1/N, or 1/(players · N_k) for MAPPO.
    let policy_weights: Vec<T> = if settings.algorithm == Algorithm::Mappo {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for s in samples {
            *counts.entry(s.player).or_default() += 1;
        }
        let players = T::from_usize(counts.len()).unwrap();
        samples
            .iter()
            .map(|s| T::one() / (players * T::from_usize(counts[&s.player]).unwrap()))
            .collect()
    } else {
        vec![inv_n; n]
    };

    let (mut pol, mut val, mut entropy, mut ival, mut pred) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (s, &pw) in samples.iter().zip(&policy_weights) {
        let out = net.forward(&s.obs, s.critic_obs.as_deref())?;
        let logp = masked_log_softmax(&out.logits, s.mask.as_deref())?;
        let new_lp = logp[s.action];
        let ratio = (new_lp - s.old_log_prob).exp();
        pol += pw * dual_clip_term(ratio, s.advantage, eps, eta);

        let probs: Vec<T> = logp.iter().map(|&l| if l.is_finite() { l.exp() } else { T::zero() }).collect();
        let h = -probs
            .iter()
            .zip(&logp)
            .filter(|(&p, _)| p > T::zero())
            .map(|(&p, &l)| p * l)
            .sum::<T>();
        entropy += inv_n * h;

        let verr = out.value - s.ret;
        val += inv_n * verr * verr;

        let (ierr, ipred) = if is_rnd {
            let iv = out
                .intrinsic_value
                .ok_or_else(|| NetError::Config("RND-PPO needs an intrinsic value head".into()))?;
            let ir = s
                .intrinsic_ret
                .ok_or_else(|| NetError::Config("sample lacks an intrinsic return".into()))?;
            (iv - ir, true)
        } else {
            (T::zero(), false)
        };
        ival += inv_n * ierr * ierr;

        if let Some(g) = grads.as_deref_mut() {
            let d_lp = pw * dual_clip_term_grad(ratio, s.advantage, eps, eta) * ratio;
            let logits_grad: Vec<T> = probs
                .iter()
                .zip(&logp)
                .enumerate()
                .map(|(j, (&p, &l))| {
                    let onehot = if j == s.action { T::one() } else { T::zero() };
                    let from_policy = d_lp * (onehot - p);
                    // d(-c·H)/dz_j = c·p_j·(log p_j + H)
                    let from_entropy = if p > T::zero() { ent * inv_n * p * (l + h) } else { T::zero() };
                    from_policy + from_entropy
                })
                .collect();
            let head = HeadGradients {
                logits: logits_grad,
                value: vw * T::lit(2.0) * verr * inv_n,
                intrinsic_value: w_iv * T::lit(2.0) * ierr * inv_n,
            };
            net.backprop(&out.trace, &head, g)?;
            if ipred {
                pred += inv_n * net.backprop_prediction(&s.obs, w_pre * inv_n, g)?;
            }
        } else if ipred {
            pred += inv_n * net.prediction_error(&s.obs)?;
        }
    }
    let parts = RndLossParts {
        policy: pol,
        value: val,
        intrinsic_value: ival,
        prediction: pred,
    };
    let weights = RndLossWeights {
        policy: 1.0,
        value: settings.ppo.value_loss_weight,
        intrinsic_value: if is_rnd { settings.rnd.weights.intrinsic_value } else { 0.0 },
        prediction: if is_rnd { settings.rnd.weights.prediction } else { 0.0 },
    };
    let total = rnd_total_loss(&parts, &weights) - ent * entropy;
    Ok(LossBreakdown {
        policy_loss: pol.as_f64(),
        value_loss: val.as_f64(),
        entropy: entropy.as_f64(),
        intrinsic_value_loss: ival.as_f64(),
        prediction_loss: pred.as_f64(),
        total: total.as_f64(),
    })
}

/// Outcome of one [`Learner::train_step`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub losses: LossBreakdown,
    pub samples: usize,
    pub minibatches_applied: usize,
    pub minibatches_dropped: usize,
    pub entropy_coefficient: f64,
    pub grad_norm: f64,
}

/// Working copy of one agent's network with its optimizer state.
#[derive(Clone, Debug)]
pub struct Learner<T> {
    pub net: PolicyValueNet<T>,
    pub adam: AdamState<T>,
    pub algorithm: Algorithm,
    pub ppo: PpoConfig,
    pub rnd: RndConfig,
    pub intrinsic_stats: RunningMoments,
    pub updates: u64,
    pub dropped_minibatches: u64,
}

impl<T: Scalar> Learner<T> {
    pub fn new(net: PolicyValueNet<T>, algorithm: Algorithm, ppo: PpoConfig, rnd: RndConfig) -> Result<Self, TrainError> {
        ppo.validate()?;
        match algorithm {
            Algorithm::RndPpo if net.rnd.is_none() => {
                return Err(TrainError::Config("RND-PPO needs predictor, target and intrinsic head".into()))
            }
            Algorithm::Mappo if net.value_torso.is_none() => {
                return Err(TrainError::Config("MAPPO needs a separated critic".into()))
            }
            _ => {}
        }
        let adam = AdamState::for_net(&net);
        Ok(Self {
            net,
            adam,
            algorithm,
            ppo,
            rnd,
            intrinsic_stats: RunningMoments::default(),
            updates: 0,
            dropped_minibatches: 0,
        })
    }

    /// Current entropy coefficient (linear decay when configured).
    pub fn entropy_coefficient(&self) -> f64 {
        match self.ppo.entropy_final {
            Some(end) if self.ppo.entropy_anneal_updates > 0 => {
                let frac = (self.updates as f64 / self.ppo.entropy_anneal_updates as f64).min(1.0);
                self.ppo.entropy_coefficient + (end - self.ppo.entropy_coefficient) * frac
            }
            _ => self.ppo.entropy_coefficient,
        }
    }

    /// One pass over the batch (sample reuse ≈ 1): shuffled minibatches, each
    /// followed by a clipped Adam step. A minibatch whose loss or gradient is
    /// non-finite is dropped without touching the parameters.
    pub fn train_step<R: Rng + ?Sized>(&mut self, trajectories: &[Trajectory<T>], rng: &mut R) -> Result<TrainReport, TrainError> {
        if self.algorithm == Algorithm::RndPpo && self.rnd.normalize_intrinsic {
            self.intrinsic_stats.update(
                trajectories
                    .iter()
                    .filter_map(|t| t.intrinsic_rewards.as_ref())
                    .flatten()
                    .map(|r| r.as_f64()),
            );
        }
        let scale = if self.rnd.normalize_intrinsic {
            T::lit(self.intrinsic_stats.std().max(1e-8))
        } else {
            T::one()
        };
        let samples = prepare_batch(trajectories, self.algorithm, &self.ppo, &self.rnd, scale)?;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(rng);
        let passes = self.ppo.sample_reuse.ceil().max(1.0) as usize;
        let ent = self.entropy_coefficient();
        let mut sum = LossBreakdown::default();
        let (mut applied, mut dropped) = (0usize, 0usize);
        let mut norm_sum = 0.0;
        for pass in 0..passes {
            if pass > 0 {
                order.shuffle(rng);
            }
            // fractional reuse: the last pass covers only part of the batch
            let take = if (pass + 1) as f64 > self.ppo.sample_reuse && pass > 0 {
                ((self.ppo.sample_reuse - pass as f64) * samples.len() as f64).round() as usize
            } else {
                samples.len()
            };
            for chunk in order[..take].chunks(self.ppo.minibatch_size) {
                let batch: Vec<&Sample<T>> = chunk.iter().map(|&i| &samples[i]).collect();
                let settings = LossSettings {
                    algorithm: self.algorithm,
                    ppo: &self.ppo,
                    rnd: &self.rnd,
                    entropy_coefficient: ent,
                };
                let mut grads = Gradients::zeros_like(&self.net);
                let res = minibatch_loss(&self.net, &batch, &settings, Some(&mut grads));
                let losses = match res {
                    Ok(l) if l.is_finite() && grads.is_finite() => l,
                    Ok(_) | Err(NetError::NonFinite(_)) => {
                        dropped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                match self.adam.step(&mut self.net, &grads, &self.ppo.adam) {
                    Ok(rep) => norm_sum += rep.grad_norm,
                    Err(NetError::NonFinite(_)) => {
                        dropped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
                applied += 1;
                sum.policy_loss += losses.policy_loss;
                sum.value_loss += losses.value_loss;
                sum.entropy += losses.entropy;
                sum.intrinsic_value_loss += losses.intrinsic_value_loss;
                sum.prediction_loss += losses.prediction_loss;
                sum.total += losses.total;
            }
        }
        self.dropped_minibatches += dropped as u64;
        if applied == 0 {
            return Err(TrainError::NonFiniteBatch);
        }
        self.updates += 1;
        let k = applied as f64;
        Ok(TrainReport {
            losses: LossBreakdown {
                policy_loss: sum.policy_loss / k,
                value_loss: sum.value_loss / k,
                entropy: sum.entropy / k,
                intrinsic_value_loss: sum.intrinsic_value_loss / k,
                prediction_loss: sum.prediction_loss / k,
                total: sum.total / k,
            },
            samples: samples.len(),
            minibatches_applied: applied,
            minibatches_dropped: dropped,
            entropy_coefficient: ent,
            grad_norm: norm_sum / k,
        })
    }
}
