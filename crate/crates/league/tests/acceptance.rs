//! Acceptance checks, one line per criterion.
//!
//! Criteria 1-5, 9 and 10 are exact or statistical checks and always gate the
//! exit status. Criteria 6-8 need long training runs. By default they run
//! at a reduced budget and only report. Set `DIS_ACCEPTANCE_STRICT=1` to make
//! them gate as well, usually together with a larger budget:
//!
//! - `DIS_ACCEPTANCE_SEEDS` seeded repetitions (default 1)
//! - `DIS_ACCEPTANCE_MINUTES` wall clock per training run; overrides
//! - `DIS_ACCEPTANCE_ITERATIONS` league iterations per training run (default 150)
//! - `DIS_ACCEPTANCE_ABLATION_ITERATIONS` league iterations per ablation arm (default 60)

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dis_core::checkpoint::{AgentRole, CheckpointId, CheckpointMeta};
use dis_core::elo::{certify_top, expected_score, screen_top, Candidate, Certificate, EloTable, TopModelPool};
use dis_core::matchmaking::{pool_selection_probs, Opponent, OpponentDistribution, Outcome, PairStats, PoolView, SamplingConfig};
use dis_core::netcore::{masked_log_softmax, NetSpec, PolicyValueNet, RndSpec};
use dis_core::pools::{PoolKind, PoolRegistry, PushOutcome};
use dis_core::rlalgos::{dual_clip_term, minibatch_loss, value_loss, Algorithm, LossSettings, PpoConfig, RndConfig, Sample};
use dis_core::{Net, NetGradients};
use dis_league::ablation::{cross_play, run_arms, Arm};
use dis_league::evaluation::{behavior_stats, counters_of, play_match, play_match_recorded, tournament};
use dis_league::{Actor, Budget, League, LeagueConfig, Selection};
use minifootball::audit::fuzz_episode;
use minifootball::config::{EnvConfig, RewardConfig, ScenarioSpec};
use minifootball::replay::ReplayWriter;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = (bool, String);

fn env_u64(name: &str, default: u64) -> u64 {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn strict() -> bool {
    std::env::var("DIS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1")
}

fn main() {
    let criteria: [(u32, &str, bool, fn() -> Check); 10] = [
        (1, "loss oracles", true, loss_oracles),
        (2, "gradient checks", true, gradient_checks),
        (3, "opponent distribution", true, opponent_distribution),
        (4, "pool semantics", true, pool_semantics),
        (5, "elo and screening", true, elo_screening),
        (6, "desk training trend", false, training_trend),
        (7, "ablation ordering", false, ablation_ordering),
        (8, "behavior diversity", false, behavior_diversity),
        (9, "determinism", true, determinism),
        (10, "environment invariants", true, environment_invariants),
    ];
    let filter: Option<BTreeSet<u32>> = std::env::var("DIS_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut gating_failures = 0;
    for (n, name, gating, f) in criteria {
        if filter.as_ref().is_some_and(|only| !only.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = f();
        let gated = gating || strict();
        println!(
            "criterion {n:>2} {} {name}: {detail} [{:.1}s{}]",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            if gated { "" } else { ", report only" }
        );
        if !pass && gated {
            gating_failures += 1;
        }
    }
    if gating_failures > 0 {
        eprintln!("{gating_failures} gating criterion/criteria failed");
        std::process::exit(1);
    }
}

// 1 -------------------------------------------------------------------------

fn dual_clip_oracle(r: f64, a: f64, eps: f64, eta: f64) -> f64 {
    let rc = if r < 1.0 - eps {
        1.0 - eps
    } else if r > 1.0 + eps {
        1.0 + eps
    } else {
        r
    };
    let m = if r * a < rc * a { r * a } else { rc * a };
    if a < 0.0 && m <= eta * a {
        -(eta * a)
    } else {
        -m
    }
}

fn loss_oracles() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let r = rng.gen_range(0.0..6.0);
        let a = rng.gen_range(-5.0..5.0);
        worst = worst.max((dual_clip_term(r, a, 0.2, 3.0) - dual_clip_oracle(r, a, 0.2, 3.0)).abs());
    }
    let mut worst_v = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..64);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let mse = v.iter().zip(&g).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64;
        worst_v = worst_v.max((value_loss(&v, &g) - mse).abs() / mse.max(1.0));
    }
    // MAPPO with a single player weighs samples exactly like PPO
    let mut identical = true;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = PolicyValueNet::new(&grad_spec(Algorithm::Mappo), &mut rng).unwrap();
        let mut batch = random_batch(&net, Algorithm::Mappo, 8, &mut rng);
        batch.iter_mut().for_each(|s| s.player = 0);
        let refs: Vec<&Sample<f64>> = batch.iter().collect();
        let (ppo, rnd) = (PpoConfig::default(), RndConfig::default());
        let loss = |algorithm| {
            let settings = LossSettings {
                algorithm,
                ppo: &ppo,
                rnd: &rnd,
                entropy_coefficient: 0.01,
            };
            minibatch_loss(&net, &refs, &settings, None).unwrap().policy_loss
        };
        identical &= loss(Algorithm::Mappo).to_bits() == loss(Algorithm::Ppo).to_bits();
    }
    let secs = t.elapsed().as_secs_f64();
    (
        worst <= 1e-12 && worst_v <= 1e-12 && identical && secs < 1.0,
        format!(
            "dual-clip max error {worst:.1e} over 10000 triples, value loss max error {worst_v:.1e}, \
             single-player MAPPO bit-identical to PPO: {identical}, {secs:.2}s"
        ),
    )
}

// 2 -------------------------------------------------------------------------

fn grad_spec(algo: Algorithm) -> NetSpec {
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
            let mask = rng.gen_bool(0.3).then(|| {
                let mut m: Vec<bool> = (0..4).map(|_| rng.gen_bool(0.7)).collect();
                m[0] = true;
                m
            });
            let lp = masked_log_softmax(&net.policy_logits(&obs).unwrap(), mask.as_deref()).unwrap();
            let legal: Vec<usize> = (0..4).filter(|&a| mask.as_ref().map_or(true, |m| m[a])).collect();
            let action = legal[rng.gen_range(0..legal.len())];
            Sample {
                player: i % 2,
                obs,
                critic_obs,
                mask,
                action,
                old_log_prob: lp[action] - rng.gen_range(-0.6..1.4),
                advantage: rng.gen_range(-2.0..2.0),
                ret: rng.gen_range(-1.0..1.0),
                intrinsic_ret: (algo == Algorithm::RndPpo).then(|| rng.gen_range(-1.0..1.0)),
            }
        })
        .collect()
}

/// Finite differences are only meaningful away from kinks and clip edges.
fn well_conditioned(net: &Net, batch: &[Sample<f64>], ppo: &PpoConfig) -> bool {
    batch.iter().all(|s| {
        let out = net.forward(&s.obs, s.critic_obs.as_deref()).unwrap();
        let lp = masked_log_softmax(&out.logits, s.mask.as_deref()).unwrap();
        let r = (lp[s.action] - s.old_log_prob).exp();
        net.kink_margin(&out.trace) >= 1e-3 && [1.0 - ppo.epsilon, 1.0 + ppo.epsilon, ppo.eta].iter().all(|b| (r - b).abs() > 1e-3)
    })
}

fn param_mut(net: &mut Net, mut i: usize) -> &mut f64 {
    for s in net.trainable_slices_mut() {
        if i < s.len() {
            return &mut s[i];
        }
        i -= s.len();
    }
    unreachable!()
}

/// Worst relative error over `batches` random batches.
fn gradient_error(algo: Algorithm, seeds: std::ops::Range<u64>) -> (usize, f64) {
    const H: f64 = 1e-5;
    let (ppo, rnd) = (PpoConfig::default(), RndConfig::default());
    let settings = LossSettings {
        algorithm: algo,
        ppo: &ppo,
        rnd: &rnd,
        entropy_coefficient: 0.01,
    };
    let (mut batches, mut worst) = (0, 0.0f64);
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = PolicyValueNet::new(&grad_spec(algo), &mut rng).unwrap();
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
        for i in 0..probe.trainable_count() {
            let orig = *param_mut(&mut probe, i);
            *param_mut(&mut probe, i) = orig + H;
            let up = minibatch_loss(&probe, &refs, &settings, None).unwrap().total;
            *param_mut(&mut probe, i) = orig - H;
            let down = minibatch_loss(&probe, &refs, &settings, None).unwrap().total;
            *param_mut(&mut probe, i) = orig;
            let fd = (up - down) / (2.0 * H);
            let g = grads.flat[i];
            let scale = fd.abs().max(g.abs());
            // tiny gradients are judged on absolute error
            worst = worst.max(if scale > 1e-4 {
                (fd - g).abs() / scale
            } else if (fd - g).abs() < 1e-9 {
                0.0
            } else {
                f64::INFINITY
            });
        }
        batches += 1;
    }
    (batches, worst)
}

fn gradient_checks() -> Check {
    let t = Instant::now();
    let runs = [
        ("PPO", gradient_error(Algorithm::Ppo, 0..34)),
        ("RND-PPO", gradient_error(Algorithm::RndPpo, 100..133)),
        ("MAPPO", gradient_error(Algorithm::Mappo, 200..233)),
    ];
    let batches: usize = runs.iter().map(|r| r.1 .0).sum();
    let worst = runs.iter().map(|r| r.1 .1).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    let per: Vec<String> = runs.iter().map(|(n, (b, w))| format!("{n} {b} batches {w:.1e}")).collect();
    (
        batches >= 100 && worst < 1e-4 && secs < 60.0,
        format!("worst relative error {worst:.1e} ({}), {secs:.1}s", per.join(", ")),
    )
}

// 3 -------------------------------------------------------------------------

fn fuzz_registry(rng: &mut ChaCha8Rng) -> (Vec<PoolView>, PairStats) {
    let n_pools = rng.gen_range(0..=5);
    let mut budget = rng.gen_range(0..=200usize);
    let mut stats = PairStats::new(0.99);
    let mut pools = Vec::new();
    for p in 0..n_pools {
        let n = if p + 1 == n_pools { budget } else { rng.gen_range(0..=budget) };
        budget -= n;
        let models: Vec<CheckpointId> = (0..n as u64).map(|k| CheckpointId::new(format!("p{p}"), k)).collect();
        for m in &models {
            for _ in 0..rng.gen_range(0..6) {
                stats.record(m, [Outcome::Win, Outcome::Draw, Outcome::Loss][rng.gen_range(0..3)]);
            }
        }
        pools.push(PoolView {
            label: format!("pool{p}"),
            models,
        });
    }
    (pools, stats)
}

fn opponent_distribution() -> Check {
    let cfg = SamplingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_sum = 0.0f64;
    for _ in 0..2000 {
        let (pools, stats) = fuzz_registry(&mut rng);
        worst_sum = worst_sum.max((OpponentDistribution::build(&pools, &stats, &cfg).total() - 1.0).abs());
    }

    let mut stats = PairStats::default();
    let (a0, a1) = (CheckpointId::new("a", 0), CheckpointId::new("a", 1));
    stats.record(&a0, Outcome::Win);
    stats.record(&a1, Outcome::Loss);
    let one = [PoolView {
        label: "one".into(),
        models: vec![a0, a1],
    }];
    let d = OpponentDistribution::build(&one, &stats, &cfg);
    let within = [d.entries[0].prob / 0.4, d.entries[1].prob / 0.4];
    let mut hand = (within[0] - 0.0344).abs() < 1e-4 && (within[1] - 0.9656).abs() < 1e-4;
    let sizes = [100usize, 10, 5, 20, 15];
    for (p, &n) in pool_selection_probs(&sizes, 0.6).iter().zip(&sizes) {
        hand &= (p - 0.4 * n as f64 / 150.0).abs() < 1e-6;
    }

    // chi-square over self-play plus every model
    let mut stats = PairStats::default();
    let mut pools = Vec::new();
    for p in 0..3u64 {
        let models: Vec<CheckpointId> = (0..6).map(|k| CheckpointId::new(format!("c{p}"), k)).collect();
        for m in &models {
            for _ in 0..rng.gen_range(1..5) {
                stats.record(m, [Outcome::Win, Outcome::Draw, Outcome::Loss][rng.gen_range(0..3)]);
            }
        }
        pools.push(PoolView {
            label: format!("c{p}"),
            models,
        });
    }
    let d = OpponentDistribution::build(&pools, &stats, &cfg);
    let n = 100_000;
    let mut counts = vec![0usize; d.entries.len() + 1];
    for _ in 0..n {
        match d.sample(&mut rng) {
            Opponent::SelfPlay => counts[0] += 1,
            Opponent::History { pool, checkpoint } => {
                counts[1 + d.entries.iter().position(|e| e.pool == pool && e.checkpoint == checkpoint).unwrap()] += 1
            }
        }
    }
    let probs: Vec<f64> = std::iter::once(d.self_prob).chain(d.entries.iter().map(|e| e.prob)).collect();
    let chi2: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&c, &p)| (c as f64 - p * n as f64).powi(2) / (p * n as f64))
        .sum();
    let p_value = 1.0 - ChiSquared::new((probs.len() - 1) as f64).unwrap().cdf(chi2);
    (
        worst_sum <= 1e-9 && hand && p_value > 0.01,
        format!(
            "max |sum - 1| {worst_sum:.1e} over 2000 registries, hand cases {} (within-pool {:.4}/{:.4}), \
             chi-square p = {p_value:.3}",
            if hand { "match" } else { "differ" },
            within[0],
            within[1]
        ),
    )
}

// 4 -------------------------------------------------------------------------

const AGENTS: [(&str, AgentRole); 6] = [
    ("main", AgentRole::Main),
    ("pe_a", AgentRole::PolicyExplorer),
    ("pe_b", AgentRole::PolicyExplorer),
    ("pe_c", AgentRole::PolicyExplorer),
    ("me_a", AgentRole::MethodExplorer),
    ("me_b", AgentRole::MethodExplorer),
];

fn meta(agent: &str, role: AgentRole, seq: u64) -> CheckpointMeta {
    CheckpointMeta {
        id: CheckpointId::new(agent, seq),
        role,
        kind: agent.into(),
        algorithm: Algorithm::Ppo,
        training_step: seq * 10,
        iteration: seq,
        creation_index: seq,
    }
}

fn cert(id: &CheckpointId) -> Certificate {
    let c = Candidate {
        id: id.clone(),
        win_rate: 0.5,
        recency: id.seq,
    };
    certify_top(&EloTable::default(), &[c], 1).remove(0)
}

fn pool_semantics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut r = PoolRegistry::new();
    for (name, role) in AGENTS {
        r.register_agent(name, role, 100).unwrap();
    }
    let mut next = [0u64; 6];
    let mut violations = Vec::new();
    for op in 0..10_000 {
        let k = rng.gen_range(0..AGENTS.len());
        let (name, role) = AGENTS[k];
        let before = r.agent(name).unwrap().clone();
        match rng.gen_range(0..10) {
            0..=5 => {
                next[k] += 1;
                let (outcome, evicted) = r.push_short_term(name, meta(name, role, next[k] - 1)).unwrap();
                let mut want: Vec<CheckpointId> = before.shmp.entries().cloned().collect();
                want.push(CheckpointId::new(name, next[k] - 1));
                let expect_evicted = (want.len() > 100).then(|| want.remove(0));
                let now: Vec<CheckpointId> = r.agent(name).unwrap().shmp.entries().cloned().collect();
                if outcome != PushOutcome::Admitted || now != want || evicted != expect_evicted {
                    violations.push(format!("op {op}: FIFO"));
                }
            }
            6 | 7 => {
                if let Some(id) = before.shmp.entries().last().cloned() {
                    r.snapshot_long_term(name, &id, true).unwrap();
                }
            }
            _ => {
                if let Some(id) = before.shmp.entries().nth(rng.gen_range(0..before.shmp.len().max(1))).cloned() {
                    r.admit_superior(name, &cert(&id)).unwrap();
                }
            }
        }
        let after = r.agent(name).unwrap();
        let prefix = |a: &dis_core::pools::HistoryModelPool, b: &dis_core::pools::HistoryModelPool| a.entries().zip(b.entries()).all(|(x, y)| x == y);
        if after.shmp.len() > 100
            || after.lhmp.len() < before.lhmp.len()
            || after.smp.len() < before.smp.len()
            || !prefix(&before.lhmp, &after.lhmp)
            || !prefix(&before.smp, &after.smp)
        {
            violations.push(format!("op {op}: capacity or monotonicity"));
        }
    }
    if r.dpmp.entries().any(|id| r.agent(&id.agent).unwrap().role == AgentRole::MethodExplorer) {
        violations.push("method-explorer checkpoint in DPMP".into());
    }
    for (name, role) in AGENTS {
        let kinds: Vec<PoolKind> = r.visible_pools(name).unwrap().into_iter().map(|(p, _)| p.kind).collect();
        let sees_dpmp = kinds.contains(&PoolKind::Dpmp);
        if sees_dpmp == (role == AgentRole::MethodExplorer) || !kinds.contains(&PoolKind::Dmmp) {
            violations.push(format!("{name} visibility"));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    r.persist(dir.path()).unwrap();
    // payloads are absent, so every entry is quarantined; compare the raw registry instead
    let text = std::fs::read_to_string(dir.path().join("pools.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let back: PoolRegistry = serde_json::from_value(value["registry"].clone()).unwrap();
    let lossless = back == r;
    (
        violations.is_empty() && lossless,
        format!(
            "10000 operations, {} violation(s){}, persistence round trip {}",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default(),
            if lossless { "lossless" } else { "lossy" }
        ),
    )
}

// 5 -------------------------------------------------------------------------

fn latent_game(skill_h: f64, skill_a: f64, rng: &mut ChaCha8Rng) -> f64 {
    let p = expected_score(skill_h, skill_a);
    let draw = 0.2 * (1.0 - (2.0 * p - 1.0).abs());
    let u: f64 = rng.gen();
    if u < draw {
        0.5
    } else if u < draw + (1.0 - draw) * p {
        1.0
    } else {
        0.0
    }
}

fn elo_screening() -> Check {
    let skills = [1400.0, 1300.0, 1200.0, 1100.0, 1000.0, 900.0, 800.0, 700.0];
    let mut hits = 0;
    for trial in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + trial);
        let mut perm: Vec<u64> = (0..8).collect();
        for i in (1..8).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let cands: Vec<(CheckpointId, u64)> = perm.iter().map(|&k| (CheckpointId::new("s", k), k)).collect();
        let mut g = ChaCha8Rng::seed_from_u64(900 + trial);
        let (_, certs) = screen_top(&cands, 3, 6, |h, a| latent_game(skills[h.seq as usize], skills[a.seq as usize], &mut g), &mut rng);
        hits += (certs.iter().map(|c| c.id().seq).collect::<BTreeSet<_>>() == BTreeSet::from([0, 1, 2])) as u32;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t = EloTable::default();
    let ids: Vec<CheckpointId> = (0..6).map(|k| CheckpointId::new("z", k)).collect();
    ids.iter().for_each(|i| t.ensure(i));
    let start = t.total();
    let mut drift = 0.0f64;
    for _ in 0..10_000 {
        let (a, b) = (rng.gen_range(0..6), rng.gen_range(0..6));
        if a != b {
            t.update(&ids[a], &ids[b], rng.gen_range(0..3) as f64 / 2.0);
            drift = drift.max((t.total() - start).abs());
        }
    }

    let mut pool = TopModelPool::default();
    let mut kept_right = true;
    let mut next = 0u64;
    for round in 0..50 {
        let batch: Vec<(CheckpointId, u64)> = (0..rng.gen_range(1..6))
            .map(|_| {
                next += 1;
                (CheckpointId::new("m", next), next)
            })
            .collect();
        let mut g = ChaCha8Rng::seed_from_u64(round);
        let skill = |c: &CheckpointId| c.seq as f64 * 30.0;
        let (_, fresh) = screen_top(&batch, 3, 2, |h, a| latent_game(skill(h), skill(a), &mut g), &mut rng);
        let union: BTreeSet<CheckpointId> = pool.members().iter().chain(&fresh).map(|c| c.id().clone()).collect();
        pool.merge_and_prune(&fresh, 2, |h, a| latent_game(skill(h), skill(a), &mut g), &mut rng);
        kept_right &= pool.members().len() == union.len().min(3);
    }
    (
        hits >= 18 && drift <= 1e-9 && kept_right,
        format!(
            "planted top three recovered in {hits}/20 trials, rating sum drift {drift:.1e} over 10000 updates, \
             merge keeps min(3, union): {kept_right}"
        ),
    )
}

// 6-8 -----------------------------------------------------------------------

fn train_budget() -> (Budget, String) {
    match std::env::var("DIS_ACCEPTANCE_MINUTES").ok().and_then(|v| v.parse::<f64>().ok()) {
        Some(m) => (
            Budget {
                iterations: None,
                wall_clock: Some(Duration::from_secs_f64(m * 60.0)),
            },
            format!("{m} min"),
        ),
        None => {
            let n = env_u64("DIS_ACCEPTANCE_ITERATIONS", 150);
            (Budget::iterations(n), format!("{n} league iterations"))
        }
    }
}

fn seeds() -> u64 {
    env_u64("DIS_ACCEPTANCE_SEEDS", 1).max(1)
}

/// Passing repetitions needed out of `n`, scaling `k` of 5.
fn needed(k: u64, n: u64) -> u64 {
    (k * n).div_ceil(5)
}

fn selection(cfg: &LeagueConfig) -> Selection {
    if cfg.evaluation.greedy {
        Selection::Greedy
    } else {
        Selection::Sample
    }
}

/// Wins of `actor` against the scripted baseline, alternating sides.
fn wins_vs_scripted(actor: &Actor, cfg: &LeagueConfig, games: u64, seed: u64) -> (u64, Vec<dis_league::evaluation::MatchOutcome>) {
    let mut wins = 0;
    let mut outcomes = Vec::new();
    for g in 0..games {
        let s = dis_league::derive_seed(seed, &[g]);
        let o = if g % 2 == 0 {
            play_match(("x", actor), ("scripted", &Actor::Scripted), &cfg.env, s, selection(cfg))
        } else {
            play_match(("scripted", &Actor::Scripted), ("x", actor), &cfg.env, s, selection(cfg))
        }
        .unwrap();
        let side = o.sides_of("x")[0];
        wins += (o.goals[side] > o.goals[1 - side]) as u64;
        outcomes.push(o);
    }
    (wins, outcomes)
}

/// One trained desk league per seed, shared by criteria 6 and 8.
fn desk_runs() -> &'static Vec<(u64, tempfile::TempDir)> {
    static RUNS: std::sync::OnceLock<Vec<(u64, tempfile::TempDir)>> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| {
        (0..seeds())
            .map(|seed| {
                let dir = tempfile::tempdir().unwrap();
                let mut cfg = LeagueConfig::desk();
                cfg.seed = seed;
                let mut l = League::create(cfg, dir.path(), None).unwrap();
                l.run(train_budget().0).unwrap();
                (seed, dir)
            })
            .collect()
    })
}

fn training_trend() -> Check {
    let mut passes = 0;
    let mut lines = Vec::new();
    for (seed, dir) in desk_runs() {
        let l = League::resume(dir.path()).unwrap();
        let cfg = l.config();
        let first = CheckpointId::new("main", 0);
        let last = l.main().last_checkpoint.clone().unwrap();
        let lhmp: Vec<CheckpointId> = l
            .registry()
            .agent("main")
            .unwrap()
            .lhmp
            .entries()
            .filter(|id| **id != first && **id != last)
            .cloned()
            .collect();
        let picked: Vec<CheckpointId> = match lhmp.len() {
            0..=3 => lhmp.clone(),
            n => (0..3).map(|k| lhmp[k * (n - 1) / 2].clone()).collect(),
        };
        let net = |id: &CheckpointId| Actor::from_net(l.net_for(id).unwrap(), &cfg.env);
        let mut entrants = vec![(first.clone(), net(&first)), (last.clone(), net(&last))];
        entrants.push((CheckpointId::new("scripted", 0), Actor::Scripted));
        entrants.extend(picked.iter().map(|id| (id.clone(), net(id))));
        let t = tournament(&entrants, 10, &cfg.env, selection(cfg), *seed, cfg.schedule.workers);
        let rating = |id: &CheckpointId| t.rating.table.rating(id).unwrap();
        let gain = rating(&last) - rating(&first);
        let (wins, _) = wins_vs_scripted(&entrants[1].1, cfg, 50, seed + 1000);
        let rate = wins as f64 / 50.0;
        let ok = gain >= 100.0 && rate >= 0.7;
        passes += ok as u64;
        lines.push(format!(
            "seed {seed}: main iteration {}, elo gain {gain:+.0} vs iteration 0 ({} lhmp in frozen set), win rate vs scripted {rate:.2}",
            l.main().iteration,
            picked.len()
        ));
    }
    let n = seeds();
    (
        passes >= needed(4, n),
        format!(
            "{passes}/{n} seeds meet gain >= 100 and win rate >= 0.70 with {} per run; {}",
            train_budget().1,
            lines.join("; ")
        ),
    )
}

fn ablation_ordering() -> Check {
    let iterations = env_u64("DIS_ACCEPTANCE_ABLATION_ITERATIONS", 60);
    let n = seeds();
    let (mut pools_ok, mut msm_ok) = (0, 0);
    let mut lines = Vec::new();
    for seed in 0..n {
        let dir = tempfile::tempdir().unwrap();
        let mut base = LeagueConfig::desk();
        base.seed = seed;
        let arms = [Arm::Full, Arm::SelfPlayOnly, Arm::Uniform];
        let runs = run_arms(&base, &arms, dir.path(), Budget::iterations(iterations), None).unwrap();
        let rep = cross_play(&runs, &base.env, 6, selection(&base), seed, base.schedule.workers);
        let (full, solo, uniform) = (
            rep.rating("full").unwrap(),
            rep.rating("ablation5").unwrap(),
            rep.rating("uniform").unwrap(),
        );
        pools_ok += (full >= solo) as u64;
        msm_ok += (full >= uniform) as u64;
        lines.push(format!("seed {seed}: full {full:.0}, self-play only {solo:.0}, uniform {uniform:.0}"));
    }
    (
        pools_ok >= needed(4, n) && msm_ok >= needed(3, n),
        format!(
            "full >= self-play only in {pools_ok}/{n}, MSM >= uniform in {msm_ok}/{n} with {iterations} iterations per arm; {}",
            lines.join("; ")
        ),
    )
}

fn behavior_diversity() -> Check {
    let mut passes = 0;
    let mut lines = Vec::new();
    for (seed, dir) in desk_runs() {
        let l = League::resume(dir.path()).unwrap();
        let cfg = l.config();
        let actor_of = |name: &str| {
            let a = l.agents().iter().find(|a| a.name() == name).unwrap();
            Actor::from_net(Arc::new(a.learner.net.clone()), &cfg.env)
        };
        let (_, main_games) = wins_vs_scripted(&actor_of("main"), cfg, 100, seed + 2000);
        let (_, pe_games) = wins_vs_scripted(&actor_of("pe_possession"), cfg, 100, seed + 2000);
        let stats = behavior_stats(&[
            ("main".into(), counters_of(&main_games, "x")),
            ("pe_possession".into(), counters_of(&pe_games, "x")),
        ]);
        let (m, p) = (stats[0].1[6], stats[1].1[6]);
        let ok = p > m && p - m >= 0.15;
        passes += ok as u64;
        lines.push(format!("seed {seed}: normalized possession main {m:.3}, explorer {p:.3}"));
    }
    let n = seeds();
    (
        passes == n,
        format!(
            "{passes}/{n} runs with explorer possession ahead by >= 0.15 over 100 games vs scripted after {}; {}",
            train_budget().1,
            lines.join("; ")
        ),
    )
}

// 9 -------------------------------------------------------------------------

fn determinism() -> Check {
    let env = EnvConfig::default();
    let replay = |seed| {
        let mut w = ReplayWriter::new(Vec::new());
        play_match_recorded(("a", &Actor::Scripted), ("b", &Actor::Random), &env, seed, Selection::Sample, &mut w).unwrap();
        w.into_inner()
    };
    let replays_equal = replay(7) == replay(7) && replay(7) != replay(8);
    let metrics = || {
        let dir = tempfile::tempdir().unwrap();
        let mut l = League::create(common::serialized(common::tiny(9)), dir.path(), None).unwrap();
        l.run(Budget::iterations(10)).unwrap();
        std::fs::read(dir.path().join("metrics.csv")).unwrap()
    };
    let (a, b) = (metrics(), metrics());
    let logs_equal = a == b && !a.is_empty();
    (
        replays_equal && logs_equal,
        format!("replays bit-identical: {replays_equal}, serialized metrics logs identical: {logs_equal}"),
    )
}

// 10 ------------------------------------------------------------------------

fn environment_invariants() -> Check {
    let base = EnvConfig {
        max_steps: 120,
        ..EnvConfig::default()
    };
    let configs = [
        (base.clone(), RewardConfig::default()),
        (
            EnvConfig {
                sticky_actions: true,
                action_masks: true,
                ..base.clone()
            },
            RewardConfig::goal_clipped(),
        ),
        (
            EnvConfig {
                team_size: 3,
                learned_keepers: true,
                ..base.clone()
            },
            RewardConfig {
                hold_ball_enabled: true,
                secondary_attack_enabled: true,
                successful_slide_enabled: true,
                ..RewardConfig::goal_clipped()
            },
        ),
        (
            EnvConfig {
                team_size: 1,
                sticky_actions: true,
                ..base
            },
            RewardConfig::possession(),
        ),
    ];
    let scenarios = ScenarioSpec::builtin();
    let mut failures = Vec::new();
    let mut steps = 0;
    for seed in 0..10_000u64 {
        let (cfg, rewards) = &configs[seed as usize % configs.len()];
        let spec = (seed % 3 != 0).then(|| {
            let mut s = scenarios[(seed / 3) as usize % scenarios.len()].clone();
            s.offense.truncate(cfg.team_size);
            s.defense.truncate(cfg.team_size);
            if seed % 3 == 2 {
                s.max_steps = 512;
            }
            s
        });
        match fuzz_episode(cfg, rewards, spec.as_ref(), seed) {
            Ok(sum) => steps += sum.steps,
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    (
        failures.is_empty(),
        format!(
            "10000 fuzzed episodes ({steps} steps), {} violation(s){}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}
