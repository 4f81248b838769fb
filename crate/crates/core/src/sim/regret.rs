//! Regret accounting over `K` episodes.

use std::io::Write;

use serde::Serialize;

use super::episode::{run_episode, MismatchCounters};
use super::learner::Learner;
use super::rng::episode_rng;
use crate::error::Result;
use crate::instance::Instance;
use crate::kernel::distribution;
use crate::statespace::{GlobalAction, GlobalState};
use crate::values::{value_table, ValueTable};

/// Per-episode costs and regret against `K·V*(s_init)`.
#[derive(Clone, Debug, Serialize)]
pub struct RegretCurve {
    pub per_episode_cost: Vec<f64>,
    /// `Σ_{j≤k} cost_j − k·v_init`.
    pub cumulative_regret: Vec<f64>,
    /// Sum over the episode's steps of the Bellman gap
    /// `1 + Σ_{s'} P(s'|s,a)·V*(s') − V*(s)`. Its expectation equals the
    /// episode's expected regret; it carries none of the transition noise.
    pub per_episode_gap: Vec<f64>,
    pub truncated: Vec<bool>,
    pub k: usize,
    pub v_init: f64,
    pub truncation_count: usize,
    pub learner: String,
    pub centralized: bool,
    pub counters: MismatchCounters,
}

impl RegretCurve {
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    pub fn total_gap(&self) -> f64 {
        self.per_episode_gap.iter().sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.per_episode_cost.iter().sum()
    }

    /// CSV with columns `k, episode_cost, cumulative_regret, truncated`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_regret_csv(
            writer,
            &self.per_episode_cost,
            &self.cumulative_regret,
            &self.truncated,
        )
    }
}

pub fn write_regret_csv<W: Write>(
    writer: W,
    cost: &[f64],
    regret: &[f64],
    truncated: &[bool],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "episode_cost", "cumulative_regret", "truncated"])?;
    for (k, ((c, r), t)) in cost.iter().zip(regret).zip(truncated).enumerate() {
        w.write_record([
            (k + 1).to_string(),
            c.to_string(),
            r.to_string(),
            t.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `1 + Σ_{s'} P(s'|s,a)·V*(s') − V*(s)`; zero at the sign-matching action.
pub fn bellman_gap(
    instance: &Instance<f64>,
    table: &ValueTable<f64>,
    state: GlobalState,
    action: &GlobalAction,
) -> f64 {
    if state.is_goal() {
        return 0.0;
    }
    let next: f64 = distribution(instance, state, action)
        .into_iter()
        .map(|(dst, p)| p * table.of(dst))
        .sum();
    1.0 + next - table.of(state)
}

/// Runs `k_episodes` episodes of `learner` with streams `(trial, episode)`
/// under `seed`.
pub fn run_regret(
    instance: &Instance<f64>,
    learner: &mut dyn Learner,
    k_episodes: usize,
    seed: u64,
    trial: u64,
) -> Result<RegretCurve> {
    let table = value_table(instance)?;
    let v_init = table.b_star;
    let h_max = instance.params().h_max;
    let mut counters = MismatchCounters::new(instance.n(), instance.width());
    let mut curve = RegretCurve {
        per_episode_cost: Vec::with_capacity(k_episodes),
        cumulative_regret: Vec::with_capacity(k_episodes),
        per_episode_gap: Vec::with_capacity(k_episodes),
        truncated: Vec::with_capacity(k_episodes),
        k: k_episodes,
        v_init,
        truncation_count: 0,
        learner: learner.tag().to_string(),
        centralized: learner.centralized(),
        counters: MismatchCounters::new(instance.n(), instance.width()),
    };
    let mut total_cost = 0.0;
    for k in 1..=k_episodes {
        learner.begin_episode(k);
        let mut rng = episode_rng(seed, trial, k as u64);
        let traj = run_episode(instance, learner, &mut rng, h_max, Some(&mut counters));
        let gap: f64 = traj
            .states
            .iter()
            .zip(&traj.actions)
            .map(|(&s, a)| bellman_gap(instance, &table, s, a))
            .sum();
        total_cost += traj.cost;
        curve.per_episode_cost.push(traj.cost);
        curve.cumulative_regret.push(total_cost - k as f64 * v_init);
        curve.per_episode_gap.push(gap);
        curve.truncated.push(traj.truncated);
        if traj.truncated {
            curve.truncation_count += 1;
        }
    }
    curve.counters = counters;
    Ok(curve)
}

/// Capped multi-episode process: up to `k_episodes` episodes run back to
/// back, stopped after `horizon` decision steps. Returns, per agent, the
/// number of those steps it spent at `s`.
pub fn capped_stay_counts(
    instance: &Instance<f64>,
    learner: &mut dyn Learner,
    k_episodes: usize,
    horizon: usize,
    seed: u64,
    trial: u64,
) -> Vec<u64> {
    let n = instance.n();
    let mut counts = vec![0u64; n];
    let mut t = 0usize;
    for k in 1..=k_episodes {
        if t >= horizon {
            break;
        }
        learner.begin_episode(k);
        let mut rng = episode_rng(seed, trial, k as u64);
        let mut state = GlobalState::init(n);
        while !state.is_goal() && t < horizon {
            for i in state.source_agents() {
                counts[i] += 1;
            }
            let action = learner.act(state, &mut rng);
            let next = super::episode::step(instance, state, &action, &mut rng);
            learner.observe(state, &action, next);
            state = next;
            t += 1;
        }
    }
    counts
}
