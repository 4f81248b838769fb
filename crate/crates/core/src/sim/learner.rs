//! Actors that pick joint actions during simulation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::features::global_feature;
use crate::instance::InstanceParams;
use crate::signs::SignMatrix;
use crate::statespace::{reachable, GlobalAction, GlobalState};
use crate::values::PolicySpec;

/// Something that acts in episodes and may learn from transitions.
pub trait Learner {
    fn tag(&self) -> &str;

    /// Whether the actor sees the global state and joint history.
    fn centralized(&self) -> bool {
        true
    }

    /// Called before episode `k` (1-based).
    fn begin_episode(&mut self, _k: usize) {}

    fn act(&mut self, state: GlobalState, rng: &mut dyn RngCore) -> GlobalAction;

    fn observe(&mut self, _state: GlobalState, _action: &GlobalAction, _next: GlobalState) {}
}

/// A fixed stationary policy.
#[derive(Clone, Debug)]
pub struct PolicyLearner {
    policy: PolicySpec,
    tag: String,
}

impl PolicyLearner {
    pub fn new(policy: PolicySpec, tag: impl Into<String>) -> Self {
        assert!(
            !matches!(policy, PolicySpec::Optimal),
            "search-optimal policies cannot act directly"
        );
        Self {
            policy,
            tag: tag.into(),
        }
    }
}

impl Learner for PolicyLearner {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn act(&mut self, state: GlobalState, _rng: &mut dyn RngCore) -> GlobalAction {
        self.policy
            .action(state)
            .unwrap_or_else(|| panic!("policy has no action for state {state}"))
            .clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Exploration rate; episode `k` flips each component with
    /// probability `epsilon / √k`.
    pub epsilon: f64,
    /// Ridge regulariser of the least-squares estimate.
    pub ridge: f64,
    /// Sign played for a component whose estimate is exactly zero.
    pub initial_sign: i8,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            ridge: 1.0,
            initial_sign: 1,
        }
    }
}

/// Least-squares sign learner with decaying ε-greedy exploration.
///
/// Every observed transition `(s, a, s')` contributes one regression row
/// per reachable successor `y`: the unknown-parameter slice of `φ(y|s,a)`
/// against `𝟙{y = s'} − (known part of ⟨φ(y|s,a), θ⟩)`. The learner plays
/// the sign of the ridge estimate. It sees the global state and the joint
/// action, so it is centralized.
#[derive(Clone, Debug)]
pub struct BaselineLearner {
    params: InstanceParams<f64>,
    config: BaselineConfig,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    estimate: DVector<f64>,
    stale: bool,
    explore: f64,
    flips: u64,
}

impl BaselineLearner {
    pub fn new(params: &InstanceParams<f64>, config: BaselineConfig) -> Self {
        let m = params.sign_count();
        Self {
            params: *params,
            config,
            gram: DMatrix::zeros(m, m),
            moment: DVector::zeros(m),
            estimate: DVector::zeros(m),
            stale: false,
            explore: 0.0,
            flips: 0,
        }
    }

    fn refresh(&mut self) {
        if !self.stale {
            return;
        }
        let m = self.moment.len();
        let reg = &self.gram + DMatrix::identity(m, m) * self.config.ridge;
        if let Some(chol) = reg.cholesky() {
            self.estimate = chol.solve(&self.moment);
        }
        self.stale = false;
    }

    /// Current ridge estimate, row-major `n × (d−1)`.
    pub fn estimate(&mut self) -> Vec<f64> {
        self.refresh();
        self.estimate.iter().copied().collect()
    }

    /// Signs the learner would play without exploration.
    pub fn greedy_signs(&mut self) -> SignMatrix {
        self.refresh();
        let n = self.params.n;
        let w = self.params.width();
        let mut signs = SignMatrix::filled(n, w, 1);
        for i in 0..n {
            for p in 0..w {
                let e = self.estimate[i * w + p];
                let s = if e > 0.0 {
                    1
                } else if e < 0.0 {
                    -1
                } else {
                    self.config.initial_sign
                };
                signs.set(i, p, s);
            }
        }
        signs
    }

    /// Exploration flips performed so far.
    pub fn exploration_flips(&self) -> u64 {
        self.flips
    }
}

impl Learner for BaselineLearner {
    fn tag(&self) -> &str {
        "baseline-lsq-egreedy"
    }

    fn begin_episode(&mut self, k: usize) {
        self.explore = self.config.epsilon / (k.max(1) as f64).sqrt();
    }

    fn act(&mut self, _state: GlobalState, rng: &mut dyn RngCore) -> GlobalAction {
        let mut signs = self.greedy_signs();
        if self.explore > 0.0 {
            for i in 0..signs.rows() {
                for p in 0..signs.cols() {
                    if rng.random_bool(self.explore.min(1.0)) {
                        signs.set(i, p, -signs.get(i, p));
                        self.flips += 1;
                    }
                }
            }
        }
        GlobalAction(signs)
    }

    fn observe(&mut self, state: GlobalState, action: &GlobalAction, next: GlobalState) {
        if state.is_goal() {
            return;
        }
        let d = self.params.d;
        let w = self.params.width();
        let m = self.moment.len();
        let mut x = DVector::zeros(m);
        for y in reachable(state) {
            let phi = global_feature(&self.params, state, action, y);
            let mut known = 0.0;
            for i in 0..self.params.n {
                for p in 0..w {
                    x[i * w + p] = phi[i * d + p];
                }
                known += phi[i * d + w];
            }
            let target = if y == next { 1.0 } else { 0.0 } - known;
            self.gram.ger(1.0, &x, &x, 1.0);
            self.moment.axpy(target, &x, 1.0);
        }
        self.stale = true;
    }
}
