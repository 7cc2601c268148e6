//! Fuzzed episodes with every environment invariant checked after each step.
//!
//! Checked per step: structural state validity, mask soundness (only actions
//! the pre-step mask forbids are ever degraded), possession bookkeeping
//! (a change event exactly when the owning team switches), zero-sum goal and
//! possession rewards between the teams, the scenario step cap, and the
//! reward audit (per-player rewards equal an independent tally of the events
//! weighted by the reward table).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{EnvConfig, RewardConfig, ScenarioSpec, SCENARIO_STEP_CAP};
use crate::rewards::{compute_rewards, goal_difference};
use crate::rules::legal_action_mask;
use crate::state::{reset_match, reset_scenario, MatchState, Team};
use crate::step::{controlled_players, step, Event};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditSummary {
    pub steps: u64,
    pub goals: [u32; 2],
    pub possession_changes: u64,
    pub degraded: u64,
    /// Sum of all per-player rewards per team.
    pub reward_totals: [f64; 2],
}

/// Independent reward tally for one player.
fn oracle_reward(events: &[Event], cfg: &RewardConfig, player: usize, team: Team) -> f64 {
    let mut goal = 0i32;
    let mut win = 0i32;
    let mut poss = 0i32;
    let mut oob = 0u32;
    let mut hold = 0u32;
    let mut sec = 0u32;
    let mut slide = 0u32;
    for e in events {
        match e {
            Event::Goal { team: t, score, .. } => {
                // clipped difference after minus before
                let mut before = *score;
                before[t.index()] -= 1;
                goal += goal_difference(*score, team, cfg.goal_clip) - goal_difference(before, team, cfg.goal_clip);
            }
            Event::MatchEnd { score } => {
                let d = goal_difference(*score, team, cfg.goal_clip);
                win += d.signum();
            }
            Event::PossessionChange { gained, .. } => poss += if *gained == team { 1 } else { -1 },
            Event::OutOfBounds { player: p } if *p == player => oob += 1,
            Event::HoldBall { player: p } if *p == player => hold += 1,
            Event::SecondaryAttack { player: p } if *p == player => sec += 1,
            Event::SlideSuccess { player: p } if *p == player => slide += 1,
            _ => {}
        }
    }
    let mut r = cfg.goal * goal as f64 + cfg.win * win as f64 + cfg.possession * poss as f64;
    r += cfg.out_of_bounds * oob as f64;
    if cfg.hold_ball_enabled {
        r += cfg.hold_ball * hold as f64;
    }
    if cfg.secondary_attack_enabled {
        r += cfg.secondary_attack * sec as f64;
    }
    if cfg.successful_slide_enabled {
        r += cfg.successful_slide * slide as f64;
    }
    r
}

fn random_actions(s: &MatchState, cfg: &EnvConfig, team: Team, rng: &mut ChaCha8Rng) -> Vec<usize> {
    controlled_players(s, cfg, team)
        .into_iter()
        .map(|p| {
            if rng.gen_bool(0.5) {
                rng.gen_range(0..cfg.action_count())
            } else if rng.gen_bool(0.3) {
                crate::scripted::scripted_action(s, cfg, p).index()
            } else {
                let legal: Vec<usize> = legal_action_mask(s, cfg, p)
                    .iter()
                    .enumerate()
                    .filter(|(_, &ok)| ok)
                    .map(|(i, _)| i)
                    .collect();
                legal[rng.gen_range(0..legal.len())]
            }
        })
        .collect()
}

/// Runs one episode with random, legal-random and scripted actions and
/// returns the first invariant violation found.
pub fn fuzz_episode(
    cfg: &EnvConfig,
    rewards: &RewardConfig,
    scenario: Option<&ScenarioSpec>,
    seed: u64,
) -> Result<AuditSummary, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut s = match scenario {
        Some(spec) => reset_scenario(cfg, spec, &mut env_rng),
        None => reset_match(cfg, &mut env_rng),
    }
    .map_err(|e| e.to_string())?;
    s.check()?;
    let mut sum = AuditSummary::default();
    let mut goals_events = [0u32; 2];
    loop {
        let masks: Vec<Vec<bool>> = (0..s.players.len()).map(|p| legal_action_mask(&s, cfg, p)).collect();
        let before_last = s.last_owner_team;
        let before_score = s.score;
        let actions = [random_actions(&s, cfg, Team::Home, &mut rng), random_actions(&s, cfg, Team::Away, &mut rng)];
        let out = step(&mut s, cfg, &actions, &mut env_rng).map_err(|e| e.to_string())?;
        sum.steps += 1;
        s.check()?;
        if s.scenario_active && s.steps_elapsed > SCENARIO_STEP_CAP {
            return Err(format!("scenario ran {} steps", s.steps_elapsed));
        }

        // mask soundness; the pre-step mask is index based and direction free
        for e in &out.events {
            if let Event::Degraded { player, action } = e {
                sum.degraded += 1;
                if masks[*player][action.index()] {
                    return Err(format!("step {}: legal {:?} of player {player} degraded", sum.steps, action));
                }
            }
        }

        // possession bookkeeping
        let changes: Vec<Team> = out
            .events
            .iter()
            .filter_map(|e| match e {
                Event::PossessionChange { gained, .. } => Some(*gained),
                _ => None,
            })
            .collect();
        sum.possession_changes += changes.len() as u64;
        let mut last = before_last;
        for g in &changes {
            if last == Some(*g) {
                return Err(format!("step {}: possession change to the team already on the ball", sum.steps));
            }
            last = Some(*g);
        }
        let kickoff_reset = out.events.iter().any(|e| matches!(e, Event::Goal { .. })) && !s.scenario_active;
        let holder = s.owner_team();
        if !kickoff_reset && holder.is_some() && holder != last {
            return Err(format!("step {}: owner team switched without an event", sum.steps));
        }

        // goals
        let mut scored = [0u32; 2];
        for e in &out.events {
            if let Event::Goal { team, score, .. } = e {
                scored[team.index()] += 1;
                goals_events[team.index()] += 1;
                let mut want = before_score;
                want[team.index()] += scored[team.index()];
                if *score != want {
                    return Err(format!("step {}: goal event score {score:?} != {want:?}", sum.steps));
                }
            }
        }
        if [before_score[0] + scored[0], before_score[1] + scored[1]] != s.score {
            return Err(format!("step {}: score moved without a goal event", sum.steps));
        }

        // rewards: zero-sum team terms and the per-player audit
        let mut team_terms = [0.0; 2];
        for team in Team::BOTH {
            let ctrl = controlled_players(&s, cfg, team);
            let got = compute_rewards(&out.events, rewards, &ctrl, team);
            for (k, &p) in ctrl.iter().enumerate() {
                let want = oracle_reward(&out.events, rewards, p, team);
                if got[k] != want {
                    return Err(format!("step {}: reward {} != audited {}", sum.steps, got[k], want));
                }
                sum.reward_totals[team.index()] += got[k];
            }
            let shared = crate::rewards::reward_counts(&out.events, rewards.goal_clip, &ctrl, team);
            if let Some(c) = shared.first() {
                team_terms[team.index()] = (c.goal + c.win + c.possession) as f64;
            }
        }
        if team_terms[0] != -team_terms[1] {
            return Err(format!("step {}: team reward terms not zero-sum {team_terms:?}", sum.steps));
        }

        if out.done {
            break;
        }
        if s.steps_elapsed > s.steps_total {
            return Err("episode overran its step budget".into());
        }
    }
    if goals_events != s.score {
        return Err("goal events do not add up to the final score".into());
    }
    sum.goals = s.score;
    Ok(sum)
}
