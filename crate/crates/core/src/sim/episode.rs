//! Sampling transitions and rolling out episodes.

use rand::Rng;
use serde::Serialize;

use super::learner::Learner;
use crate::instance::Instance;
use crate::kernel::distribution;
use crate::signs::SignMatrix;
use crate::statespace::{GlobalAction, GlobalState};

/// Draws the next state from the closed-form kernel.
pub fn step<R: Rng + ?Sized>(
    instance: &Instance<f64>,
    state: GlobalState,
    action: &GlobalAction,
    rng: &mut R,
) -> GlobalState {
    if state.is_goal() {
        return state;
    }
    let u: f64 = rng.random();
    let dist = distribution(instance, state, action);
    let mut acc = 0.0;
    for &(dst, p) in &dist {
        acc += p;
        if u < acc {
            return dst;
        }
    }
    // Rounding left u above the accumulated mass.
    dist.last().expect("non-empty successor set").0
}

/// Per-agent counts while at `s`: steps spent there and, per component,
/// steps whose action sign disagreed with a reference pattern.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MismatchCounters {
    width: usize,
    stays: Vec<u64>,
    mismatches: Vec<u64>,
}

impl MismatchCounters {
    pub fn new(n: usize, width: usize) -> Self {
        Self {
            width,
            stays: vec![0; n],
            mismatches: vec![0; n * width],
        }
    }

    /// Counts one decision step at `state`.
    pub fn record(&mut self, state: GlobalState, action: &GlobalAction, reference: &SignMatrix) {
        for i in state.source_agents() {
            self.stays[i] += 1;
            for p in 0..self.width {
                if action.get(i, p) != reference.get(i, p) {
                    self.mismatches[i * self.width + p] += 1;
                }
            }
        }
    }

    /// Steps agent `i` spent at `s`.
    pub fn stays(&self, agent: usize) -> u64 {
        self.stays[agent]
    }

    /// Steps agent `i` at `s` chose component `j` against the reference.
    pub fn mismatches(&self, agent: usize, j: usize) -> u64 {
        self.mismatches[agent * self.width + j]
    }

    pub fn total_mismatches(&self) -> u64 {
        self.mismatches.iter().sum()
    }
}

/// One rollout from `s_init`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Visited states, ending with the goal unless truncated.
    pub states: Vec<GlobalState>,
    /// Action taken at `states[h]`.
    pub actions: Vec<GlobalAction>,
    /// Decision steps taken.
    pub length: usize,
    pub truncated: bool,
    /// Uniform cost: equals `length`.
    pub cost: f64,
}

/// Rolls out one episode of at most `h_max` steps. When `counters` is given
/// they are updated against the instance's `θ`.
pub fn run_episode<R: Rng>(
    instance: &Instance<f64>,
    actor: &mut dyn Learner,
    rng: &mut R,
    h_max: usize,
    mut counters: Option<&mut MismatchCounters>,
) -> Trajectory {
    let mut state = GlobalState::init(instance.n());
    let mut states = vec![state];
    let mut actions = Vec::new();
    while !state.is_goal() && actions.len() < h_max {
        let action = actor.act(state, rng);
        if let Some(c) = counters.as_deref_mut() {
            c.record(state, &action, &instance.theta().signs);
        }
        let next = step(instance, state, &action, rng);
        actor.observe(state, &action, next);
        actions.push(action);
        states.push(next);
        state = next;
    }
    let length = actions.len();
    Trajectory {
        truncated: !state.is_goal(),
        states,
        actions,
        length,
        cost: length as f64,
    }
}
