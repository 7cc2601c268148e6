//! `dis`: train, evaluate and inspect self-play league runs.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dis_core::{Checkpoint, CheckpointId};
use dis_league::ablation::{cross_play, parse_arms, run_arms};
use dis_league::evaluation::{
    judgment_report, play_match, play_match_recorded, position_heatmap, ratings_from_outcomes, read_outcomes, render_report,
    report_csv, tournament, write_outcomes,
};
use dis_league::manifest::RunManifest;
use dis_league::{Actor, Budget, League, LeagueConfig, Selection};
use minifootball::replay::ReplayWriter;
use minifootball::EnvConfig;

#[derive(Parser)]
#[command(name = "dis", version, about = "Population-based self-play league for mini football")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a run, or continue one with --resume.
    Train {
        #[arg(long, conflicts_with = "resume")]
        config: Option<PathBuf>,
        /// Run directory to continue.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Directory for a new run.
        #[arg(long, default_value = "runs/latest")]
        run_dir: PathBuf,
        /// Main-agent starting checkpoint for a new run.
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long)]
        minutes: Option<f64>,
    },
    /// Round robin over a run's checkpoints, with the judgment report.
    Eval {
        #[arg(long)]
        run: PathBuf,
        /// `top` (every agent's top pool), an agent name (its short-term
        /// pool), or `agent/kind` such as `main/lhmp`.
        #[arg(long, default_value = "top")]
        pool: String,
        /// Games per pair.
        #[arg(long, default_value_t = 4)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default: `<run>/eval`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One match between two checkpoints (or `scripted` / `random`).
    Play {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Environment settings; defaults to the desk profile.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        replay: Option<PathBuf>,
        #[arg(long)]
        greedy: bool,
    },
    /// Judgment report from an outcome log.
    Report {
        /// Outcome log (JSON lines) or a run directory holding `eval/outcomes.jsonl`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        csv: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Runs ablation arms and rates their final main agents against each other.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated arm names.
        #[arg(long, default_value = "full,ablation1,ablation2,ablation3,ablation4,ablation5")]
        arms: String,
        #[arg(long, default_value = "runs/ablation")]
        out: PathBuf,
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        iterations: u64,
        #[arg(long, default_value_t = 10)]
        games: usize,
    },
    /// Deletes checkpoint payloads nothing refers to any more.
    Gc {
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train {
            config,
            resume,
            run_dir,
            start,
            iterations,
            minutes,
        } => train(config, resume, run_dir, start, iterations, minutes),
        Command::Eval {
            run,
            pool,
            games,
            seed,
            out,
        } => eval(&run, &pool, games, seed, out),
        Command::Play {
            a,
            b,
            seed,
            config,
            replay,
            greedy,
        } => play(&a, &b, seed, config, replay, greedy),
        Command::Report { input, csv, seed } => report(&input, csv, seed),
        Command::Ablate {
            config,
            arms,
            out,
            start,
            iterations,
            games,
        } => ablate(config, &arms, &out, start, iterations, games),
        Command::Gc { run } => gc(&run),
    }
}

fn load_config(path: Option<&Path>) -> Result<LeagueConfig> {
    Ok(match path {
        Some(p) => LeagueConfig::load(p)?,
        None => LeagueConfig::desk(),
    })
}

fn load_net(path: &Path) -> Result<dis_core::Net> {
    Ok(Checkpoint::load(path)
        .with_context(|| format!("loading checkpoint {}", path.display()))?
        .net)
}

fn train(
    config: Option<PathBuf>,
    resume: Option<PathBuf>,
    run_dir: PathBuf,
    start: Option<PathBuf>,
    iterations: Option<u64>,
    minutes: Option<f64>,
) -> Result<()> {
    let mut league = match resume {
        Some(dir) => League::resume(&dir)?,
        None => {
            let cfg = load_config(config.as_deref())?;
            let start = start.as_deref().map(load_net).transpose()?;
            League::create(cfg, &run_dir, start.as_ref())?
        }
    };
    let budget = Budget {
        iterations,
        wall_clock: minutes.map(|m| Duration::from_secs_f64(m * 60.0)),
    };
    let done = league.run(budget)?;
    println!(
        "{} iterations run; league iteration {}; state in {}",
        done,
        league.league_iteration(),
        league.dir().display()
    );
    Ok(())
}

fn pool_members(league: &League, pool: &str) -> Result<Vec<CheckpointId>> {
    let reg = league.registry();
    if pool == "top" {
        let mut ids = Vec::new();
        for a in league.agents() {
            for m in a.top_pool.members() {
                if !ids.contains(m.id()) {
                    ids.push(m.id().clone());
                }
            }
        }
        return Ok(ids);
    }
    let (agent, kind) = pool.split_once('/').unwrap_or((pool, "shmp"));
    let shared = match kind {
        "dpmp" => Some(&reg.dpmp),
        "dmmp" => Some(&reg.dmmp),
        _ => None,
    };
    if let Some(p) = shared {
        return Ok(p.entries().cloned().collect());
    }
    let a = reg.agent(agent)?;
    Ok(match kind {
        "shmp" => a.shmp.entries().cloned().collect(),
        "lhmp" => a.lhmp.entries().cloned().collect(),
        "smp" => a.smp.entries().cloned().collect(),
        other => bail!("unknown pool kind `{other}`"),
    })
}

fn eval(run: &Path, pool: &str, games: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let league = League::resume(run)?;
    let cfg = league.config();
    let ids = pool_members(&league, pool)?;
    if ids.len() < 2 {
        bail!("pool `{pool}` holds {} checkpoint(s); need at least two", ids.len());
    }
    let entrants = ids
        .iter()
        .map(|id| Ok((id.clone(), Actor::from_net(league.net_for(id)?, &cfg.env))))
        .collect::<Result<Vec<_>>>()?;
    let selection = if cfg.evaluation.greedy {
        Selection::Greedy
    } else {
        Selection::Sample
    };
    let t = tournament(&entrants, games, &cfg.env, selection, seed, cfg.schedule.workers);
    let out = out.unwrap_or_else(|| run.join("eval"));
    fs::create_dir_all(out.join("heatmaps"))?;
    let mut w = BufWriter::new(fs::File::create(out.join("outcomes.jsonl"))?);
    write_outcomes(&mut w, &t.outcomes)?;
    drop(w);
    let ratings: Vec<(String, f64)> = t
        .ids
        .iter()
        .map(|id| (id.to_string(), t.rating.table.rating(id).unwrap_or(t.rating.table.initial)))
        .collect();
    let rows = judgment_report(&ratings, &t.outcomes);
    for r in &rows {
        if let Some(h) = position_heatmap(&t.outcomes, &r.checkpoint) {
            fs::write(out.join(&r.heatmap), h.to_csv())?;
        }
    }
    fs::write(out.join("report.csv"), report_csv(&rows))?;
    let text = render_report(&rows);
    fs::write(out.join("report.txt"), &text)?;
    print!("{text}");
    for s in &t.skipped {
        eprintln!("skipped: {s}");
    }
    Ok(())
}

fn actor_arg(spec: &str, env: &EnvConfig) -> Result<(String, Actor)> {
    Ok(match spec {
        "scripted" => ("scripted".into(), Actor::Scripted),
        "random" => ("random".into(), Actor::Random),
        path => {
            let ck = Checkpoint::load(Path::new(path)).with_context(|| format!("loading checkpoint {path}"))?;
            (ck.meta.id.to_string(), Actor::from_net(Arc::new(ck.net), env))
        }
    })
}

fn play(a: &str, b: &str, seed: u64, config: Option<PathBuf>, replay: Option<PathBuf>, greedy: bool) -> Result<()> {
    let cfg = load_config(config.as_deref())?;
    let (la, aa) = actor_arg(a, &cfg.env)?;
    let (mut lb, ab) = actor_arg(b, &cfg.env)?;
    if lb == la {
        lb.push_str("'");
    }
    let selection = if greedy { Selection::Greedy } else { Selection::Sample };
    let outcome = match replay {
        Some(path) => {
            let mut w = ReplayWriter::new(BufWriter::new(fs::File::create(&path)?));
            play_match_recorded((&la, &aa), (&lb, &ab), &cfg.env, seed, selection, &mut w)?
        }
        None => play_match((&la, &aa), (&lb, &ab), &cfg.env, seed, selection)?,
    };
    println!(
        "{} {} - {} {} ({} steps)",
        outcome.a, outcome.goals[0], outcome.goals[1], outcome.b, outcome.steps
    );
    Ok(())
}

fn report(input: &Path, csv: bool, seed: u64) -> Result<()> {
    let path = if input.is_dir() {
        input.join("eval").join("outcomes.jsonl")
    } else {
        input.to_path_buf()
    };
    let file = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let outcomes = read_outcomes(BufReader::new(file))?;
    let rows = judgment_report(&ratings_from_outcomes(&outcomes, seed), &outcomes);
    if csv {
        print!("{}", report_csv(&rows));
    } else {
        print!("{}", render_report(&rows));
    }
    Ok(())
}

fn ablate(config: Option<PathBuf>, arms: &str, out: &Path, start: Option<PathBuf>, iterations: u64, games: usize) -> Result<()> {
    let cfg = load_config(config.as_deref())?;
    let arms = parse_arms(arms).map_err(anyhow::Error::msg)?;
    let start = start.as_deref().map(load_net).transpose()?;
    let runs = run_arms(&cfg, &arms, out, Budget::iterations(iterations), start.as_ref())?;
    let selection = if cfg.evaluation.greedy {
        Selection::Greedy
    } else {
        Selection::Sample
    };
    let rep = cross_play(&runs, &cfg.env, games, selection, cfg.seed, cfg.schedule.workers);
    fs::write(out.join("ablation.csv"), rep.to_csv())?;
    print!("{}", rep.render());
    Ok(())
}

fn gc(run: &Path) -> Result<()> {
    // the manifest check fails loudly on a run that is not ours
    RunManifest::load(run)?;
    let league = League::resume(run)?;
    let keep: BTreeSet<CheckpointId> = league.keep_set();
    let removed = league.store().gc(league.registry(), &keep)?;
    println!("removed {} unreferenced checkpoint(s)", removed.len());
    Ok(())
}
