//! Loss, advantage, sampling and training-step properties checked against
//! independent recomputations.

use dis_core::netcore::{masked_softmax, sample_action, Activation, Mlp, NetSpec, PolicyValueNet, RndSpec};
use dis_core::rlalgos::{
    compute_gae, dual_clip_term, mappo_policy_loss, minibatch_loss, ppo_dual_clip_policy_loss, prepare_batch,
    rnd_combined_advantage, rnd_intrinsic_reward, rnd_total_loss, value_loss, Algorithm, Learner, LossSettings,
    PpoConfig, RndConfig, RndLossParts, RndLossWeights, Sample, Trajectory,
};
use dis_core::{Net, NetGradients};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight transcription of the two branches of the objective.
fn dual_clip_oracle(r: f64, a: f64, eps: f64, eta: f64) -> f64 {
    let rc = if r < 1.0 - eps {
        1.0 - eps
    } else if r > 1.0 + eps {
        1.0 + eps
    } else {
        r
    };
    let m = if r * a < rc * a { r * a } else { rc * a };
    if a >= 0.0 {
        -m
    } else if m > eta * a {
        -m
    } else {
        -(eta * a)
    }
}

fn standard_clip(r: f64, a: f64, eps: f64) -> f64 {
    -(r * a).min(r.clamp(1.0 - eps, 1.0 + eps) * a)
}

proptest! {
    #[test]
    fn dual_clip_matches_oracle(r in 1e-3f64..8.0, a in -5.0f64..5.0) {
        let got = dual_clip_term(r, a, 0.2, 3.0);
        prop_assert!((got - dual_clip_oracle(r, a, 0.2, 3.0)).abs() <= 1e-12);
    }

    #[test]
    fn dual_clip_bounds(r in 1e-3f64..20.0, a in -5.0f64..5.0) {
        let objective = -dual_clip_term(r, a, 0.2, 3.0);
        if a >= 0.0 {
            prop_assert!(objective <= 1.2 * a + 1e-12);
        } else {
            prop_assert!(objective >= 3.0 * a - 1e-12);
        }
    }

    #[test]
    fn dual_clip_reduces_to_standard_clip(r in 1e-3f64..5.0, a in -5.0f64..5.0) {
        if (r - 1.0).abs() <= 0.2 || a >= 0.0 {
            prop_assert_eq!(dual_clip_term(r, a, 0.2, 3.0), standard_clip(r, a, 0.2));
        }
    }

    #[test]
    fn returns_minus_values_are_advantages(
        data in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, any::<bool>()), 1..40),
        boot in -1.0f64..1.0,
    ) {
        let r: Vec<f64> = data.iter().map(|d| d.0).collect();
        let v: Vec<f64> = data.iter().map(|d| d.1).collect();
        let t: Vec<bool> = data.iter().map(|d| d.2).collect();
        let (adv, ret) = compute_gae(&r, &v, &t, boot, 0.9995, 0.95);
        for i in 0..r.len() {
            prop_assert_eq!(ret[i], v[i] + adv[i]);
            prop_assert!((ret[i] - v[i] - adv[i]).abs() <= 1e-15 * (1.0 + ret[i].abs()));
        }
    }

    #[test]
    fn gae_matches_explicit_sum(
        data in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..30),
        boot in -1.0f64..1.0,
        gamma in 0.5f64..1.0,
        lambda in 0.5f64..1.0,
    ) {
        // no terminals: Â_t = Σ_l (γλ)^l δ_{t+l}
        let r: Vec<f64> = data.iter().map(|d| d.0).collect();
        let v: Vec<f64> = data.iter().map(|d| d.1).collect();
        let n = r.len();
        let delta: Vec<f64> = (0..n)
            .map(|t| r[t] + gamma * if t + 1 < n { v[t + 1] } else { boot } - v[t])
            .collect();
        let (adv, _) = compute_gae(&r, &v, &vec![false; n], boot, gamma, lambda);
        for t in 0..n {
            let want: f64 = (t..n).map(|k| (gamma * lambda).powi((k - t) as i32) * delta[k]).sum();
            prop_assert!((adv[t] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn value_loss_matches_mse(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50)) {
        let v: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let g: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mut acc = 0.0;
        for i in 0..v.len() {
            acc += (v[i] - g[i]).powi(2);
        }
        prop_assert!((value_loss(&v, &g) - acc / v.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn rnd_total_is_weighted_sum(p in -5.0f64..5.0, v in 0.0f64..5.0, iv in 0.0f64..5.0, pre in 0.0f64..5.0) {
        let parts = RndLossParts { policy: p, value: v, intrinsic_value: iv, prediction: pre };
        let want = p + 0.5 * v + 0.5 * iv + pre;
        prop_assert!((rnd_total_loss(&parts, &RndLossWeights::default()) - want).abs() < 1e-12);
    }

    #[test]
    fn mappo_mean_matches_oracle(losses in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let want = losses.iter().sum::<f64>() / losses.len() as f64;
        prop_assert!((mappo_policy_loss(&losses) - want).abs() < 1e-12);
    }

    #[test]
    fn softmax_normalized_and_positive(
        logits in prop::collection::vec(-30.0f64..30.0, 1..20),
        mask_bits in prop::collection::vec(any::<bool>(), 20),
        temp in 0.05f64..5.0,
    ) {
        let mut mask: Vec<bool> = mask_bits[..logits.len()].to_vec();
        mask[0] = true;
        let p = masked_softmax(&logits, Some(&mask), temp).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let top = logits.iter().zip(&mask).filter(|(_, m)| **m).map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
        for ((pi, m), l) in p.iter().zip(&mask).zip(&logits) {
            // exp underflows past a scaled gap of about 745
            if !*m {
                prop_assert_eq!(*pi, 0.0);
            } else if (top - l) / temp < 700.0 {
                prop_assert!(*pi > 0.0);
            } else {
                prop_assert!(*pi >= 0.0);
            }
        }
    }
}

#[test]
fn loss_examples() {
    assert_eq!(ppo_dual_clip_policy_loss(&[0.0], &[0.0], &[2.0], 0.2, 3.0), -2.0);
    assert!((dual_clip_term(1.5f64, 1.0, 0.2, 3.0) + 1.2).abs() < 1e-15);
    assert!((dual_clip_term(5.0f64, -1.0, 0.2, 3.0) - 3.0).abs() < 1e-15);
    assert_eq!(value_loss(&[0.0, 0.0], &[1.0, 3.0]), 5.0);
    assert_eq!(rnd_combined_advantage(&[1.0], &[0.5], 2.0, 8.0), vec![6.0]);
    assert_eq!(rnd_combined_advantage(&[0.7], &[0.3], 1.0, 0.0), vec![0.7]);
    let x: f64 = ppo_dual_clip_policy_loss(&[0.1, -0.3], &[0.0, 0.2], &[1.0, -2.0], 0.2, 3.0);
    assert_eq!(mappo_policy_loss(&[x]).to_bits(), x.to_bits());
    assert_eq!(mappo_policy_loss(&[2.0, 4.0]), 3.0);
}

#[test]
fn gae_examples() {
    let (a, g) = compute_gae(&[1.0], &[0.0], &[true], 0.0, 0.9995, 0.95);
    assert_eq!((a[0], g[0]), (1.0, 1.0));
    let (a, _) = compute_gae(&[0.0, 1.0], &[0.5, 0.5], &[false, true], 0.0, 1.0, 1.0);
    assert_eq!(a, vec![0.5, 0.5]);
    let (a, _) = compute_gae(&[0.0; 3], &[0.4; 3], &[false, false, true], 0.0, 1.0, 1.0);
    assert_eq!(a[2], -0.4);
}

#[test]
fn sampling_probability_example() {
    let p = masked_softmax(&[0.0, 1.0], None, 0.3).unwrap();
    let e = (1.0f64 / 0.3).exp();
    assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-12 && (p[1] - e / (1.0 + e)).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let (a, lp) = sample_action(&[0.0, 10.0], Some(&[true, false]), 1.0, &mut rng).unwrap();
        assert_eq!((a, lp), (0, 0.0));
    }
}

fn small_spec(rnd: bool) -> NetSpec {
    NetSpec {
        obs_dim: 6,
        actions: 4,
        torso: [8, 8, 8],
        head: [6, 6],
        critic_obs_dim: None,
        rnd: rnd.then_some(RndSpec { hidden: 8, embedding: 4 }),
    }
}

/// Independent straight-line forward pass for one block.
fn oracle_block(m: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for l in &m.layers {
        let mut z = vec![0.0; l.outputs];
        for o in 0..l.outputs {
            let mut acc = l.bias[o];
            for i in 0..l.inputs {
                acc += l.weights[o * l.inputs + i] * h[i];
            }
            z[o] = match l.activation {
                Activation::LeakyRelu if acc < 0.0 => 0.01 * acc,
                _ => acc,
            };
        }
        h = z;
    }
    h
}

#[test]
fn forward_matches_straight_line_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let net = Net::new(&small_spec(false), &mut rng).unwrap();
    let obs: Vec<f64> = (0..6).map(|i| (i as f64 * 0.37).sin()).collect();
    let out = net.forward(&obs, None).unwrap();
    let feat = oracle_block(&net.torso, &obs);
    let logits = oracle_block(&net.policy_head, &feat);
    let value = oracle_block(&net.value_head, &feat)[0];
    for (a, b) in out.logits.iter().zip(&logits) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((out.value - value).abs() < 1e-12);

    let again = net.forward(&obs, None).unwrap();
    assert_eq!(
        out.logits.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        again.logits.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(out.value.to_bits(), again.value.to_bits());
}

fn random_trajectory(net: &Net, rnd: bool, len: usize, rng: &mut ChaCha8Rng) -> Trajectory<f64> {
    let mut t = Trajectory::empty(0);
    for step in 0..len {
        let obs: Vec<f64> = (0..net.obs_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = net.forward(&obs, None).unwrap();
        let (a, lp) = sample_action(&out.logits, None, 1.0, rng).unwrap();
        t.obs.push(obs);
        t.actions.push(a);
        t.old_log_probs.push(lp);
        t.rewards.push(rng.gen_range(-1.0..1.0));
        t.values_old.push(out.value);
        t.terminals.push(step + 1 == len);
    }
    if rnd {
        t.intrinsic_rewards = Some((0..len).map(|_| rng.gen_range(0.0..1.0)).collect());
        t.intrinsic_values_old = Some((0..len).map(|_| rng.gen_range(-0.5..0.5)).collect());
    }
    t
}

fn ppo_cfg() -> PpoConfig {
    PpoConfig {
        minibatch_size: 16,
        batch_size: 64,
        ..PpoConfig::default()
    }
}

#[test]
fn train_step_is_deterministic_and_leaves_target_frozen() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Net::new(&small_spec(true), &mut rng).unwrap();
    let trajs: Vec<_> = (0..4).map(|_| random_trajectory(&net, true, 16, &mut rng)).collect();
    let target_before: Vec<u64> = net.rnd.as_ref().unwrap().target.flat().iter().map(|x| x.to_bits()).collect();
    let run = || {
        let mut l = Learner::new(net.clone(), Algorithm::RndPpo, ppo_cfg(), RndConfig::default()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            l.train_step(&trajs, &mut r).unwrap();
        }
        l.net
    };
    let (a, b) = (run(), run());
    let bits = |n: &Net| -> Vec<u64> { n.all_blocks().iter().flat_map(|m| m.flat()).map(f64::to_bits).collect() };
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&net));
    let target_after: Vec<u64> = a.rnd.as_ref().unwrap().target.flat().iter().map(|x| x.to_bits()).collect();
    assert_eq!(target_before, target_after);
}

#[test]
fn vanishing_learning_rate_is_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = Net::new(&small_spec(false), &mut rng).unwrap();
    let trajs: Vec<_> = (0..4).map(|_| random_trajectory(&net, false, 16, &mut rng)).collect();
    let mut cfg = ppo_cfg();
    cfg.adam.lr = 0.0;
    let mut l = Learner::new(net, Algorithm::Ppo, cfg, RndConfig::default()).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let first = l.train_step(&trajs, &mut r).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let second = l.train_step(&trajs, &mut r).unwrap();
    assert_eq!(first.losses, second.losses);
}

#[test]
fn zero_advantage_perfect_value_leaves_only_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let net = Net::new(&small_spec(false), &mut rng).unwrap();
    let samples: Vec<Sample<f64>> = (0..8)
        .map(|_| {
            let obs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let out = net.forward(&obs, None).unwrap();
            Sample {
                player: 0,
                action: 1,
                old_log_prob: -1.0,
                advantage: 0.0,
                ret: out.value,
                intrinsic_ret: None,
                critic_obs: None,
                mask: None,
                obs,
            }
        })
        .collect();
    let refs: Vec<&Sample<f64>> = samples.iter().collect();
    let ppo = PpoConfig::default();
    let rnd = RndConfig::default();
    let grad = |ent: f64| {
        let mut g = NetGradients::zeros_like(&net);
        let s = LossSettings {
            algorithm: Algorithm::Ppo,
            ppo: &ppo,
            rnd: &rnd,
            entropy_coefficient: ent,
        };
        minibatch_loss(&net, &refs, &s, Some(&mut g)).unwrap();
        g
    };
    assert!(grad(0.0).flat.iter().all(|&x| x == 0.0));
    let g = grad(0.01);
    let policy_end = net.torso.param_count() + net.policy_head.param_count();
    assert!(g.flat[..policy_end].iter().any(|&x| x != 0.0));
    assert!(g.flat[policy_end..].iter().all(|&x| x == 0.0));
}

#[test]
fn rnd_without_intrinsic_weight_matches_ppo_policy_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let rnd_net = Net::new(&small_spec(true), &mut rng).unwrap();
    let mut ppo_net = rnd_net.clone();
    ppo_net.rnd = None;
    let trajs: Vec<_> = (0..3).map(|_| random_trajectory(&rnd_net, true, 12, &mut rng)).collect();
    let ppo = PpoConfig::default();
    let rnd = RndConfig {
        intrinsic_coefficient: 0.0,
        extrinsic_coefficient: 1.0,
        ..RndConfig::default()
    };
    let a = prepare_batch(&trajs, Algorithm::RndPpo, &ppo, &rnd, 1.0).unwrap();
    let b = prepare_batch(&trajs, Algorithm::Ppo, &ppo, &rnd, 1.0).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.advantage.to_bits(), y.advantage.to_bits());
    }
    let run = |net: &Net, algo, samples: &[Sample<f64>]| {
        let refs: Vec<&Sample<f64>> = samples.iter().collect();
        let mut g = NetGradients::zeros_like(net);
        let s = LossSettings {
            algorithm: algo,
            ppo: &ppo,
            rnd: &rnd,
            entropy_coefficient: 0.01,
        };
        let l = minibatch_loss(net, &refs, &s, Some(&mut g)).unwrap();
        let start = net.torso.param_count();
        (l.policy_loss, g.flat[start..start + net.policy_head.param_count()].to_vec())
    };
    let (la, ga) = run(&rnd_net, Algorithm::RndPpo, &a);
    let (lb, gb) = run(&ppo_net, Algorithm::Ppo, &b);
    assert_eq!(la.to_bits(), lb.to_bits());
    assert_eq!(ga, gb);
}

#[test]
fn intrinsic_reward_falls_on_a_repeated_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = Net::new(&small_spec(true), &mut rng).unwrap();
    let obs = vec![0.3, -0.2, 0.9, 0.1, -0.7, 0.5];
    let r = net.rnd.as_ref().unwrap();
    let before = rnd_intrinsic_reward(&r.predictor, &r.target, &obs).unwrap();
    let mut t = random_trajectory(&net, true, 32, &mut rng);
    t.obs.iter_mut().for_each(|o| *o = obs.clone());
    let mut cfg = ppo_cfg();
    cfg.adam.lr = 1e-3;
    let mut l = Learner::new(net, Algorithm::RndPpo, cfg, RndConfig::default()).unwrap();
    for _ in 0..50 {
        l.train_step(std::slice::from_ref(&t), &mut rng).unwrap();
    }
    let r = l.net.rnd.as_ref().unwrap();
    let after = rnd_intrinsic_reward(&r.predictor, &r.target, &obs).unwrap();
    assert!(after < before, "{after} !< {before}");

    let copy = rnd_intrinsic_reward(&r.target, &r.target, &obs).unwrap();
    assert_eq!(copy, 0.0);
}

#[test]
fn widened_input_policy_matches_on_zero_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = PolicyValueNet::<f64>::new(&small_spec(false), &mut rng).unwrap();
    let wide = net.with_widened_input(18).unwrap();
    let obs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut padded = obs.clone();
    padded.resize(18, 0.0);
    assert_eq!(net.policy_logits(&obs).unwrap(), wide.policy_logits(&padded).unwrap());
}
