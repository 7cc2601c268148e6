mod common;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use common::{serialized, tiny};
use dis_core::pools::PoolRegistry;
use dis_core::AgentRole;
use dis_league::agents::{AgentKind, PolicyVariant};
use dis_league::league::FaultHook;
use dis_league::manifest::RunManifest;
use dis_league::metrics::{read_rows, IterationRow};
use dis_league::{Budget, League, LeagueError};
use minifootball::observation::{base_len, encode_observation, HistoryStack};
use minifootball::reset_match;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(cfg: dis_league::LeagueConfig, dir: &Path, iterations: u64) -> League {
    let mut l = League::create(cfg, dir, None).unwrap();
    l.run(Budget::iterations(iterations)).unwrap();
    l
}

fn metrics(dir: &Path) -> Vec<IterationRow> {
    read_rows(&dir.join("metrics.csv")).unwrap()
}

#[test]
fn zero_duration_leaves_empty_pools() {
    let tmp = tempfile::tempdir().unwrap();
    let l = run(tiny(1), tmp.path(), 0);
    assert_eq!(l.league_iteration(), 0);
    assert!(l.registry().referenced().is_empty());
    let m = RunManifest::load(tmp.path()).unwrap();
    assert_eq!(m.league_iteration, 0);
    assert!(m.agents.iter().all(|a| a.iteration == 0 && a.last_checkpoint.is_none()));
    assert_eq!(m.metrics_rows, 0);
    // an empty budget runs nothing either
    let mut l = League::resume(tmp.path()).unwrap();
    assert_eq!(l.run(Budget::default()).unwrap(), 0);
}

#[test]
fn serialized_runs_repeat_exactly() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(serialized(tiny(2)), a.path(), 14);
    run(serialized(tiny(2)), b.path(), 14);
    for f in ["metrics.csv", "elo.csv", "pools.json", "state/main.ckpt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(metrics(a.path()).len(), 14);
}

#[test]
fn threaded_collection_matches_serialized() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(serialized(tiny(3)), a.path(), 12);
    let mut cfg = tiny(3);
    cfg.schedule.workers = 3;
    cfg.schedule.queue_capacity = 1;
    run(cfg, b.path(), 12);
    assert_eq!(metrics(a.path()), metrics(b.path()));
    for f in ["elo.csv", "pools.json", "state/main.ckpt", "state/me_mappo.ckpt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(tiny(4), a.path(), 20);
    run(tiny(4), b.path(), 9);
    // rows written after the last manifest are dropped on resume
    fs::write(
        b.path().join("metrics.csv"),
        fs::read_to_string(b.path().join("metrics.csv")).unwrap() + "999,junk\n",
    )
    .unwrap();
    let mut l = League::resume(b.path()).unwrap();
    l.run(Budget::iterations(11)).unwrap();
    assert_eq!(metrics(a.path()), metrics(b.path()));
    let (ra, _) = PoolRegistry::load(a.path()).unwrap();
    let (rb, _) = PoolRegistry::load(b.path()).unwrap();
    assert_eq!(ra, rb);
    let (ma, mb) = (RunManifest::load(a.path()).unwrap(), RunManifest::load(b.path()).unwrap());
    assert_eq!(ma.agents, mb.agents);
    assert_eq!(fs::read(a.path().join("elo.csv")).unwrap(), fs::read(b.path().join("elo.csv")).unwrap());
}

#[test]
fn existing_run_is_not_overwritten() {
    let tmp = tempfile::tempdir().unwrap();
    run(tiny(5), tmp.path(), 1);
    assert!(matches!(League::create(tiny(5), tmp.path(), None), Err(LeagueError::Exists(_))));
}

#[test]
fn edited_config_blocks_resume() {
    let tmp = tempfile::tempdir().unwrap();
    run(tiny(5), tmp.path(), 1);
    let p = tmp.path().join("config.toml");
    let text = fs::read_to_string(&p).unwrap().replace("seed = 5", "seed = 6");
    fs::write(&p, text).unwrap();
    assert!(League::resume(tmp.path()).is_err());
}

#[test]
fn episode_shares_follow_the_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let l = run(tiny(6), tmp.path(), 120);
    let total: u64 = l.agents().iter().map(|a| a.episodes).sum();
    let mut by_group = [0u64; 3];
    for a in l.agents() {
        by_group[a.setup.kind.share_group()] += a.episodes;
    }
    for (g, &n) in by_group.iter().enumerate() {
        let want = l.config().agents.shares[g];
        let got = n as f64 / total as f64;
        assert!((got / want - 1.0).abs() <= 0.05, "group {g}: {got} vs {want}");
    }
}

#[test]
fn pools_fill_by_the_rules() {
    let tmp = tempfile::tempdir().unwrap();
    let l = run(tiny(7), tmp.path(), 60);
    let reg = l.registry();
    for a in l.agents() {
        let pools = reg.agent(a.name()).unwrap();
        // the iteration-0 checkpoint plus one per `publish_every` iterations
        let expected = 1 + a.iteration / 2;
        assert_eq!(pools.shmp.len() as u64, expected.min(100), "{}", a.name());
        assert_eq!(pools.lhmp.len() as u64, a.iteration / 4, "{}", a.name());
        if a.iteration >= 4 {
            assert!(!pools.smp.is_empty(), "{}", a.name());
            assert!(!a.top_pool.members().is_empty());
            assert!(a.top_pool.members().len() <= 3);
        }
    }
    for id in reg.dpmp.entries() {
        assert_ne!(reg.meta(id).unwrap().role, AgentRole::MethodExplorer);
    }
    assert!(reg.dmmp.entries().any(|id| id.agent.starts_with("me_")));
    for a in l.agents() {
        if matches!(a.setup.kind, AgentKind::MethodExplorer(_)) || a.setup.kind == AgentKind::Main {
            assert_eq!(a.syncs, 0);
        }
    }
}

#[test]
fn self_play_only_keeps_pools_out_of_matchmaking() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(8);
    cfg.pools.enabled.clear();
    run(cfg, tmp.path(), 24);
    for r in metrics(tmp.path()) {
        assert_eq!(r.self_play_episodes as u64, r.episodes, "{r:?}");
    }
}

#[test]
fn builtin_opponents_appear_at_the_configured_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(9);
    cfg.pools.enabled.clear();
    cfg.sampling.builtin_opponent_rate = 0.5;
    run(cfg, tmp.path(), 30);
    let rows = metrics(tmp.path());
    let eps: u64 = rows.iter().map(|r| r.episodes).sum();
    let sp: u64 = rows.iter().map(|r| r.self_play_episodes as u64).sum();
    let rate = 1.0 - sp as f64 / eps as f64;
    assert!((0.3..0.7).contains(&rate), "{rate}");
}

#[test]
fn crashed_episodes_are_discarded_and_counted() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let hook: FaultHook = Arc::new(|agent: &str, iteration: u64, episode: usize| agent == "main" && iteration == 1 && episode == 0);
    let mut l = League::create(serialized(tiny(10)), a.path(), None)
        .unwrap()
        .with_fault_hook(hook.clone());
    l.run(Budget::iterations(8)).unwrap();
    let rows = metrics(a.path());
    let hit: Vec<&IterationRow> = rows.iter().filter(|r| r.failed_episodes > 0).collect();
    assert_eq!(hit.len(), 1);
    assert_eq!((hit[0].agent.as_str(), hit[0].iteration, hit[0].failed_episodes), ("main", 1, 1));
    assert!(hit[0].samples >= 512);
    assert_eq!(l.main().failed_episodes, 1);

    // the same fault under worker threads gives the same result
    let mut cfg = tiny(10);
    cfg.schedule.workers = 3;
    let mut l = League::create(cfg, b.path(), None).unwrap().with_fault_hook(hook);
    l.run(Budget::iterations(8)).unwrap();
    assert_eq!(rows, metrics(b.path()));
}

#[test]
fn diverging_trainer_rolls_back_to_its_last_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(11);
    cfg.ppo.adam.lr = 1e200;
    cfg.ppo.adam.clip_norm = None;
    cfg.schedule.divergence_streak = 2;
    let mut l = League::create(cfg, tmp.path(), None).unwrap();
    l.run(Budget::iterations(36)).unwrap();
    let rows = metrics(tmp.path());
    assert!(rows.iter().any(|r| r.rolled_back), "no rollback in {} rows", rows.len());
    assert!(l.agents().iter().any(|a| a.rollbacks > 0));
    for a in l.agents() {
        let finite = a.learner.net.trainable_slices().iter().all(|s| s.iter().all(|v| v.is_finite()));
        if a.rollbacks > 0 && a.fail_streak == 0 {
            assert!(finite, "{}", a.name());
        }
    }
}

/// Steps the league until a policy explorer reaches a sync point and checks
/// it against the main checkpoint it copied.
#[test]
fn policy_explorers_copy_the_main_agent() {
    let tmp = tempfile::tempdir().unwrap();
    let mut l = League::create(tiny(12), tmp.path(), None).unwrap();
    let mut checked = std::collections::BTreeSet::new();
    for _ in 0..120 {
        let next = l.next_agent();
        let main_ck = l.main().last_checkpoint.clone();
        let before = l.agents()[next].syncs;
        l.step().unwrap();
        let a = &l.agents()[next];
        if a.syncs == before {
            continue;
        }
        let main = l.net_for(main_ck.as_ref().unwrap()).unwrap();
        match a.setup.kind {
            AgentKind::PolicyExplorer(PolicyVariant::HistoryInput) => {
                let cfg = l.config();
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let s = reset_match(&cfg.env, &mut rng).unwrap();
                let frame = encode_observation(&s, &cfg.env, 1);
                let mut stack = HistoryStack::new(a.setup.history);
                let wide = stack.push(frame.clone());
                assert_eq!(wide.len(), base_len(&cfg.env) * (1 + a.setup.history));
                let (x, y) = (a.learner.net.policy_logits(&wide).unwrap(), main.policy_logits(&frame).unwrap());
                for (u, v) in x.iter().zip(&y) {
                    assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()), "{u} vs {v}");
                }
            }
            AgentKind::PolicyExplorer(_) => {
                assert_eq!(a.learner.net, *main);
                assert_eq!(a.learner.adam, dis_core::Adam::for_net(&a.learner.net));
            }
            _ => panic!("{} synced", a.name()),
        }
        checked.insert(a.name());
    }
    assert_eq!(checked.len(), 3, "{checked:?}");
}
