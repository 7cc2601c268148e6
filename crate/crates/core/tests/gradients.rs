//! Reverse-mode gradients against central finite differences.

use dis_core::netcore::{NetSpec, PolicyValueNet, RndSpec};
use dis_core::rlalgos::{minibatch_loss, Algorithm, LossSettings, PpoConfig, RndConfig, Sample};
use dis_core::{Net, NetGradients};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

fn spec(algo: Algorithm) -> NetSpec {
    NetSpec {
        obs_dim: 5,
        actions: 4,
        torso: [7, 6, 6],
        head: [5, 4],
        critic_obs_dim: (algo == Algorithm::Mappo).then_some(8),
        rnd: (algo == Algorithm::RndPpo).then_some(RndSpec { hidden: 6, embedding: 3 }),
    }
}

fn random_batch(net: &Net, algo: Algorithm, n: usize, rng: &mut ChaCha8Rng) -> Vec<Sample<f64>> {
    (0..n)
        .map(|i| {
            let obs: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let critic_obs = (algo == Algorithm::Mappo).then(|| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let mask = if rng.gen_bool(0.3) {
                let mut m: Vec<bool> = (0..4).map(|_| rng.gen_bool(0.7)).collect();
                m[0] = true;
                Some(m)
            } else {
                None
            };
            let logits = net.policy_logits(&obs).unwrap();
            let lp = dis_core::netcore::masked_log_softmax(&logits, mask.as_deref()).unwrap();
            let legal: Vec<usize> = (0..4).filter(|&a| mask.as_ref().map_or(true, |m| m[a])).collect();
            let action = legal[rng.gen_range(0..legal.len())];
            // ratio spread across both clip regions
            let old_log_prob = lp[action] - rng.gen_range(-0.6..1.4);
            Sample {
                player: i % 2,
                obs,
                critic_obs,
                mask,
                action,
                old_log_prob,
                advantage: rng.gen_range(-2.0..2.0),
                ret: rng.gen_range(-1.0..1.0),
                intrinsic_ret: (algo == Algorithm::RndPpo).then(|| rng.gen_range(-1.0..1.0)),
            }
        })
        .collect()
}

/// Keeps finite differences away from leaky-ReLU kinks and clip boundaries.
fn well_conditioned(net: &Net, batch: &[Sample<f64>], ppo: &PpoConfig) -> bool {
    batch.iter().all(|s| {
        let out = net.forward(&s.obs, s.critic_obs.as_deref()).unwrap();
        if net.kink_margin(&out.trace) < 1e-3 {
            return false;
        }
        let lp = dis_core::netcore::masked_log_softmax(&out.logits, s.mask.as_deref()).unwrap();
        let r = (lp[s.action] - s.old_log_prob).exp();
        [1.0 - ppo.epsilon, 1.0 + ppo.epsilon, ppo.eta]
            .iter()
            .all(|b| (r - b).abs() > 1e-3)
    })
}

fn check(algo: Algorithm, seeds: std::ops::Range<u64>) -> usize {
    let ppo = PpoConfig::default();
    let rnd = RndConfig::default();
    let settings = LossSettings {
        algorithm: algo,
        ppo: &ppo,
        rnd: &rnd,
        entropy_coefficient: 0.01,
    };
    let mut checked = 0;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = PolicyValueNet::new(&spec(algo), &mut rng).unwrap();
        let batch = loop {
            let b = random_batch(&net, algo, 4, &mut rng);
            if well_conditioned(&net, &b, &ppo) {
                break b;
            }
        };
        let refs: Vec<&Sample<f64>> = batch.iter().collect();
        let mut grads = NetGradients::zeros_like(&net);
        minibatch_loss(&net, &refs, &settings, Some(&mut grads)).unwrap();

        let mut probe = net.clone();
        let n = probe.trainable_count();
        for i in 0..n {
            let orig = get(&probe, i);
            set(&mut probe, i, orig + H);
            let up = minibatch_loss(&probe, &refs, &settings, None).unwrap().total;
            set(&mut probe, i, orig - H);
            let down = minibatch_loss(&probe, &refs, &settings, None).unwrap().total;
            set(&mut probe, i, orig);
            let fd = (up - down) / (2.0 * H);
            let g = grads.flat[i];
            let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-6);
            assert!(
                rel < REL_TOL || (fd - g).abs() < 1e-9,
                "{algo:?} seed {seed} param {i}: analytic {g} vs numeric {fd} (rel {rel})"
            );
        }
        checked += 1;
    }
    checked
}

fn get(net: &Net, mut i: usize) -> f64 {
    for s in net.trainable_slices() {
        if i < s.len() {
            return s[i];
        }
        i -= s.len();
    }
    unreachable!()
}

fn set(net: &mut Net, mut i: usize, v: f64) {
    for s in net.trainable_slices_mut() {
        if i < s.len() {
            s[i] = v;
            return;
        }
        i -= s.len();
    }
    unreachable!()
}

#[test]
fn ppo_gradients_match_finite_differences() {
    assert_eq!(check(Algorithm::Ppo, 0..40), 40);
}

#[test]
fn rnd_ppo_gradients_match_finite_differences() {
    assert_eq!(check(Algorithm::RndPpo, 100..130), 30);
}

#[test]
fn mappo_gradients_match_finite_differences() {
    assert_eq!(check(Algorithm::Mappo, 200..230), 30);
}
