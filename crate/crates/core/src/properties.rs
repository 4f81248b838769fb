//! Checkers for the instance lemmas: the binomial inequality, the
//! value-weighted probability difference, the stay-probability floor and the
//! truncated visit count.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::kernel::{distribution, mismatch_counts, p_star, prob_with_counts};
use crate::scalar::{binomial, Scalar};
use crate::sim::experiment::{mean_ci, LearnerFactory};
use crate::sim::regret::capped_stay_counts;
use crate::statespace::{enumerate_actions, reachable, GlobalAction, GlobalState};
use crate::values::{optimal_action, value_table, PolicySpec, ValueTable};

/// Slack at or below this is numerically indeterminate.
pub const STRICT_TOL: f64 = 1e-12;
/// Largest `n` for the exhaustive scans.
pub const MAX_N_EXHAUSTIVE: usize = 4;
/// Largest `n·(d−1)` for the exhaustive scans.
pub const MAX_ACTION_BITS: usize = 12;
pub const MAX_N_LEMMA6_DP: usize = 2;
pub const MAX_K_LEMMA6_DP: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Slack in `(0, STRICT_TOL]`.
    Indeterminate,
    /// Nothing to check.
    Vacuous,
}

impl Verdict {
    pub fn from_slack(slack: f64) -> Self {
        if slack > STRICT_TOL {
            Verdict::Pass
        } else if slack > 0.0 {
            Verdict::Indeterminate
        } else {
            Verdict::Fail
        }
    }

    /// Worse of two verdicts; `Vacuous` is neutral.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Indeterminate, _) | (_, Indeterminate) => Indeterminate,
            (Pass, _) | (_, Pass) => Pass,
            _ => Vacuous,
        }
    }

    pub fn ok(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::Vacuous)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma3Term {
    pub r: usize,
    pub r_next: usize,
    /// `'a'` for `r' ≤ ⌊(r+1)/2⌋`, else `'b'`.
    pub branch: char,
    /// `C(r+1,r')·p*_{r+1,r'}`.
    pub upper: f64,
    /// `C(r,r')·p*_{r,r'}`.
    pub lower: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma3Report {
    pub min_slack_a: Option<f64>,
    pub min_slack_b: Option<f64>,
    pub verdict: Verdict,
    pub terms: Vec<Lemma3Term>,
}

/// For `r ∈ [n−1]`: branch (a), `r' ≤ ⌊(r+1)/2⌋`, needs
/// `C(r+1,r')·p*_{r+1,r'} < C(r,r')·p*_{r,r'}`; branch (b), the other
/// `r' ≤ r`, needs the reverse.
pub fn check_lemma3<T: Scalar>(instance: &Instance<T>) -> Result<Lemma3Report> {
    let n = instance.n();
    let mut terms = Vec::new();
    for r in 1..n {
        for r_next in 0..=r {
            let upper =
                (binomial::<T>(r + 1, r_next) * p_star(instance, r + 1, r_next)?).to_f64_lossy();
            let lower = (binomial::<T>(r, r_next) * p_star(instance, r, r_next)?).to_f64_lossy();
            let (branch, slack) = if r_next <= r.div_ceil(2) {
                ('a', lower - upper)
            } else {
                ('b', upper - lower)
            };
            terms.push(Lemma3Term {
                r,
                r_next,
                branch,
                upper,
                lower,
                slack,
            });
        }
    }
    let min_of = |b: char| {
        terms
            .iter()
            .filter(|t| t.branch == b)
            .map(|t| t.slack)
            .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))))
    };
    let min_slack_a = min_of('a');
    let min_slack_b = min_of('b');
    let verdict = [min_slack_a, min_slack_b]
        .into_iter()
        .flatten()
        .map(Verdict::from_slack)
        .fold(Verdict::Vacuous, Verdict::and);
    Ok(Lemma3Report {
        min_slack_a,
        min_slack_b,
        verdict,
        terms,
    })
}

/// `Σ_{s'≠s} [P(s'|s,a) − P(s'|s,a_θ)]·v[type(s')]`.
pub fn check_lemma5<T: Scalar>(
    instance: &Instance<T>,
    state: GlobalState,
    action: &GlobalAction,
    values: &ValueTable<T>,
) -> Result<T> {
    if state.is_goal() {
        return Err(Error::OutOfRange {
            what: "state",
            value: state.to_string(),
            range: "non-goal states".into(),
        });
    }
    let counts = mismatch_counts(instance, action);
    let zero = vec![0; instance.n()];
    let mut sum = T::zero();
    for dst in reachable(state) {
        if dst == state {
            continue;
        }
        let diff = prob_with_counts(instance, state, dst, &counts)
            - prob_with_counts(instance, state, dst, &zero);
        sum += diff * values.of(dst);
    }
    Ok(sum)
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma5Report {
    pub min_value: f64,
    pub argmin_state: String,
    pub argmin_action: String,
    pub checked_pairs: usize,
    pub tol: f64,
    pub pass: bool,
}

fn check_scan_caps<T: Scalar>(instance: &Instance<T>) -> Result<()> {
    if instance.n() > MAX_N_EXHAUSTIVE {
        return Err(Error::CapExceeded {
            what: "n for exhaustive lemma scans",
            required: instance.n(),
            cap: MAX_N_EXHAUSTIVE,
        });
    }
    Ok(())
}

/// Minimum of [`check_lemma5`] over every non-goal state and joint action.
pub fn lemma5_exhaustive<T: Scalar>(instance: &Instance<T>, tol: f64) -> Result<Lemma5Report> {
    check_scan_caps(instance)?;
    let values = value_table(instance)?;
    let n = instance.n();
    let mut best = (f64::INFINITY, String::new(), String::new());
    let mut checked = 0;
    for action in enumerate_actions(n, instance.width(), MAX_ACTION_BITS)? {
        for state in GlobalState::all(n).filter(|s| !s.is_goal()) {
            let v = check_lemma5(instance, state, &action, &values)?.to_f64_lossy();
            checked += 1;
            if v < best.0 {
                best = (v, state.to_string(), action.to_string());
            }
        }
    }
    Ok(Lemma5Report {
        min_value: best.0,
        argmin_state: best.1,
        argmin_action: best.2,
        checked_pairs: checked,
        tol,
        pass: best.0 >= -tol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma8Report {
    pub min_stay: f64,
    pub argmin_state: String,
    pub argmin_action: String,
    pub argmin_agent: usize,
    /// `(3n + 2 − 4δ) / (6n)`.
    pub analytic_floor: f64,
    pub tol: f64,
    /// `min_stay > 1/2` and `min_stay ≥ analytic_floor − tol`.
    pub pass: bool,
}

/// `(3n + 2 − 4δ) / (6n)`.
pub fn lemma8_floor<T: Scalar>(n: usize, delta: T) -> T {
    let nf = T::from_usize_lossy(n);
    (T::lit(3.0) * nf + T::lit(2.0) - T::lit(4.0) * delta) / (T::lit(6.0) * nf)
}

/// Probability that `agent`, at `s` in `state`, is still at `s` next step.
pub fn agent_stay_prob<T: Scalar>(
    instance: &Instance<T>,
    state: GlobalState,
    action: &GlobalAction,
    agent: usize,
) -> T {
    distribution(instance, state, action)
        .into_iter()
        .filter(|(dst, _)| dst.at_source(agent))
        .map(|(_, p)| p)
        .fold(T::zero(), |a, b| a + b)
}

pub fn check_lemma8<T: Scalar>(instance: &Instance<T>, tol: f64) -> Result<Lemma8Report> {
    check_scan_caps(instance)?;
    let n = instance.n();
    let mut best = (f64::INFINITY, String::new(), String::new(), 0);
    for action in enumerate_actions(n, instance.width(), MAX_ACTION_BITS)? {
        for state in GlobalState::all(n).filter(|s| !s.is_goal()) {
            for agent in state.source_agents() {
                let p = agent_stay_prob(instance, state, &action, agent).to_f64_lossy();
                if p < best.0 {
                    best = (p, state.to_string(), action.to_string(), agent);
                }
            }
        }
    }
    let floor = lemma8_floor(n, instance.delta()).to_f64_lossy();
    Ok(Lemma8Report {
        min_stay: best.0,
        argmin_state: best.1,
        argmin_action: best.2,
        argmin_agent: best.3,
        analytic_floor: floor,
        tol,
        pass: best.0 > 0.5 && best.0 >= floor - tol,
    })
}

/// `P[episode length from state ≥ x]` under a stationary policy.
pub fn episode_tail<T: Scalar>(
    instance: &Instance<T>,
    policy: &PolicySpec,
    state: GlobalState,
    x: usize,
) -> Result<T> {
    if x == 0 {
        return Err(Error::OutOfRange {
            what: "x",
            value: "0".into(),
            range: "x ≥ 1".into(),
        });
    }
    let n = instance.n();
    let mut mass = vec![T::zero(); 1 << n];
    if !state.is_goal() {
        mass[state.index()] = T::one();
    }
    for _ in 1..x {
        mass = substochastic_step(instance, policy, &mass)?;
    }
    Ok(mass.iter().copied().fold(T::zero(), |a, b| a + b))
}

/// One application of the kernel restricted to non-goal states.
fn substochastic_step<T: Scalar>(
    instance: &Instance<T>,
    policy: &PolicySpec,
    mass: &[T],
) -> Result<Vec<T>> {
    let n = instance.n();
    let mut next = vec![T::zero(); mass.len()];
    for (idx, &m) in mass.iter().enumerate() {
        if idx == 0 || m == T::zero() {
            continue;
        }
        let s = GlobalState::new(n, idx as u32);
        let a = policy_action(policy, s)?;
        for (dst, p) in distribution(instance, s, a) {
            if !dst.is_goal() {
                next[dst.index()] += m * p;
            }
        }
    }
    Ok(next)
}

pub(crate) fn policy_action(policy: &PolicySpec, state: GlobalState) -> Result<&GlobalAction> {
    match policy {
        PolicySpec::Optimal => Err(Error::UnsupportedPolicy(
            "search-optimal policies are not stationary tables; pass Constant or Table",
        )),
        _ => policy
            .action(state)
            .ok_or_else(|| Error::MissingAction(state.to_string())),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma6Report {
    #[serde(rename = "K")]
    pub k: usize,
    pub trials: usize,
    /// `⌈2·K·V*_1⌉`.
    pub horizon: usize,
    pub v1: f64,
    /// `K·V*_1 / 4`.
    pub threshold: f64,
    pub per_agent_estimates: Vec<f64>,
    /// Per agent `[lower, upper]` 95% interval.
    pub ci: Vec<[f64; 2]>,
    pub learner: String,
    pub seed: u64,
    pub pass: bool,
}

/// `⌈2·K·V*_1⌉`.
pub fn lemma6_horizon(k_episodes: usize, v1: f64) -> usize {
    (2.0 * k_episodes as f64 * v1).ceil() as usize
}

/// Monte Carlo estimate of each agent's truncated stay count over the capped
/// `K`-episode process.
pub fn check_lemma6(
    instance: &Instance<f64>,
    factory: &LearnerFactory<'_>,
    k_episodes: usize,
    trials: usize,
    seed: u64,
) -> Result<Lemma6Report> {
    let n = instance.n();
    let v1 = value_table(instance)?.v1();
    let horizon = lemma6_horizon(k_episodes, v1);
    let threshold = k_episodes as f64 * v1 / 4.0;
    let mut samples = vec![Vec::with_capacity(trials); n];
    let mut tag = String::new();
    for t in 0..trials {
        let mut learner = factory(instance);
        if tag.is_empty() {
            tag = learner.tag().to_string();
        }
        let counts = capped_stay_counts(
            instance,
            learner.as_mut(),
            k_episodes,
            horizon,
            seed,
            t as u64,
        );
        for (i, c) in counts.into_iter().enumerate() {
            samples[i].push(c as f64);
        }
    }
    let mut estimates = Vec::with_capacity(n);
    let mut ci = Vec::with_capacity(n);
    for s in &samples {
        let (m, h) = mean_ci(s);
        estimates.push(m);
        ci.push([m - h, m + h]);
    }
    let pass = ci.iter().all(|c| c[0] >= threshold);
    Ok(Lemma6Report {
        k: k_episodes,
        trials,
        horizon,
        v1,
        threshold,
        per_agent_estimates: estimates,
        ci,
        learner: tag,
        seed,
        pass,
    })
}

/// Exact per-agent expected stay counts of the capped process for a
/// stationary policy, by forward DP over (episodes completed, state).
pub fn lemma6_exact(
    instance: &Instance<f64>,
    policy: &PolicySpec,
    k_episodes: usize,
) -> Result<Vec<f64>> {
    let n = instance.n();
    if n > MAX_N_LEMMA6_DP || k_episodes > MAX_K_LEMMA6_DP {
        return Err(Error::CapExceeded {
            what: "(n, K) for the exact capped-process DP",
            required: n.max(k_episodes),
            cap: if n > MAX_N_LEMMA6_DP {
                MAX_N_LEMMA6_DP
            } else {
                MAX_K_LEMMA6_DP
            },
        });
    }
    let mut expected = vec![0.0; n];
    if k_episodes == 0 {
        return Ok(expected);
    }
    let v1 = value_table(instance)?.v1();
    let horizon = lemma6_horizon(k_episodes, v1);
    let states = 1usize << n;
    let init = GlobalState::init(n).index();
    let mut mass = vec![0.0; k_episodes * states];
    mass[init] = 1.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; mass.len()];
        for k in 0..k_episodes {
            for idx in 1..states {
                let m = mass[k * states + idx];
                if m == 0.0 {
                    continue;
                }
                let s = GlobalState::new(n, idx as u32);
                for (i, e) in expected.iter_mut().enumerate() {
                    if s.at_source(i) {
                        *e += m;
                    }
                }
                let a = policy_action(policy, s)?;
                for (dst, p) in distribution(instance, s, a) {
                    if dst.is_goal() {
                        if k + 1 < k_episodes {
                            next[(k + 1) * states + init] += m * p;
                        }
                    } else {
                        next[k * states + dst.index()] += m * p;
                    }
                }
            }
        }
        mass = next;
    }
    Ok(expected)
}

/// Combined lemma report.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub lemma3: Lemma3Report,
    pub lemma5: Lemma5Report,
    pub lemma8: Lemma8Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma6: Option<Lemma6Report>,
}

impl LemmaReport {
    pub fn pass(&self) -> bool {
        self.lemma3.verdict.ok()
            && self.lemma5.pass
            && self.lemma8.pass
            && self.lemma6.as_ref().is_none_or(|r| r.pass)
    }
}

/// Lemmas 3, 5 and 8 on one instance; Lemma 6 is attached by the caller.
pub fn check_lemmas<T: Scalar>(instance: &Instance<T>, tol: f64) -> Result<LemmaReport> {
    Ok(LemmaReport {
        lemma3: check_lemma3(instance)?,
        lemma5: lemma5_exhaustive(instance, tol)?,
        lemma8: check_lemma8(instance, tol)?,
        lemma6: None,
    })
}

/// The sign-matching action as a constant policy.
pub fn optimal_policy<T: Scalar>(instance: &Instance<T>) -> PolicySpec {
    PolicySpec::Constant(optimal_action(instance.theta()))
}
