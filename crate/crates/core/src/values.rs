//! Optimal action, the type-level value recursion, a brute-force value
//! iteration oracle over the full state space, one-state Q-values and the
//! optimal-structure verifier.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceParams, ThetaPattern};
use crate::kernel::{mismatch_counts, p_star, prob_with_counts};
use crate::scalar::{binomial, Scalar};
use crate::signs::SignMatrix;
use crate::statespace::{enumerate_actions, reachable, state_type, GlobalAction, GlobalState};

/// Largest `n` for exhaustive optimal-structure checks.
pub const MAX_N_EXHAUSTIVE: usize = 4;
/// Largest `d` for exhaustive optimal-structure checks.
pub const MAX_D_EXHAUSTIVE: usize = 3;
pub const DEFAULT_VI_TOL: f64 = 1e-12;
pub const DEFAULT_VI_MAX_ITER: usize = 1_000_000;
pub const DEFAULT_THEOREM_TOL: f64 = 1e-10;

/// Sign-matching action: `a_{i,j} = sgn(θ_{i,j})`.
pub fn optimal_action<T: Scalar>(theta: &ThetaPattern<T>) -> GlobalAction {
    GlobalAction(theta.signs.clone())
}

/// Every component opposite to `θ`.
pub fn fully_mismatched_action<T: Scalar>(theta: &ThetaPattern<T>) -> GlobalAction {
    GlobalAction(theta.signs.negated())
}

/// Stationary deterministic policy.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    /// The same joint action everywhere.
    Constant(GlobalAction),
    /// One joint action per state, indexed by mask. The goal entry is
    /// never consulted.
    Table(Vec<GlobalAction>),
    /// Bellman-optimal by exhaustive search over the joint action space.
    /// Only meaningful to [`value_iteration`].
    Optimal,
}

impl PolicySpec {
    /// `None` for [`PolicySpec::Optimal`].
    pub fn action(&self, state: GlobalState) -> Option<&GlobalAction> {
        match self {
            PolicySpec::Constant(a) => Some(a),
            PolicySpec::Table(t) => t.get(state.index()),
            PolicySpec::Optimal => None,
        }
    }

    /// Uniformly random table over all states of an `n`-agent instance.
    pub fn random_table<R: Rng + ?Sized>(n: usize, width: usize, rng: &mut R) -> Self {
        let table = (0..1usize << n)
            .map(|_| {
                let mut signs = SignMatrix::filled(n, width, 1);
                for i in 0..n {
                    for p in 0..width {
                        if rng.random::<bool>() {
                            signs.set(i, p, -1);
                        }
                    }
                }
                GlobalAction(signs)
            })
            .collect();
        PolicySpec::Table(table)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            PolicySpec::Constant(_) => "constant",
            PolicySpec::Table(_) => "table",
            PolicySpec::Optimal => "optimal-search",
        }
    }
}

/// Optimal values by type, `v[0] = 0`, `v[n] = B*`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueTable<T> {
    pub v: Vec<T>,
    pub b_star: T,
}

impl<T: Scalar> ValueTable<T> {
    pub fn get(&self, r: usize) -> T {
        self.v[r]
    }

    pub fn v1(&self) -> T {
        self.v[1]
    }

    /// Value of a state, looked up by its type.
    pub fn of(&self, state: GlobalState) -> T {
        self.v[state_type(state)]
    }

    /// `v[r+1] − v[r]` for `r = 0..n−1`.
    pub fn gaps(&self) -> Vec<T> {
        self.v.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn strictly_increasing(&self) -> bool {
        self.v.windows(2).all(|w| w[1] > w[0])
    }

    /// `v[1] − B*/n`; non-negative on every valid instance, zero at `n = 1`.
    pub fn diameter_slack(&self) -> T {
        let n = self.v.len() - 1;
        self.v[1] - self.b_star / T::from_usize_lossy(n)
    }
}

/// `V*_r = (1 + Σ_{r'=1}^{r−1} C(r,r')·p*_{r,r'}·V*_{r'}) / (1 − p*_{r,r})`.
pub fn value_table<T: Scalar>(instance: &Instance<T>) -> Result<ValueTable<T>> {
    let n = instance.n();
    let mut v = vec![T::zero(); n + 1];
    for r in 1..=n {
        let stay = p_star(instance, r, r)?;
        if stay >= T::one() {
            return Err(Error::DegenerateSelfLoop(stay.to_f64_lossy()));
        }
        let mut acc = T::one();
        for (k, &vk) in v.iter().enumerate().take(r).skip(1) {
            acc += binomial::<T>(r, k) * p_star(instance, r, k)? * vk;
        }
        v[r] = acc / (T::one() - stay);
    }
    let b_star = v[n];
    Ok(ValueTable { v, b_star })
}

/// `2n / (n − 1 + 2(δ + Δ))`, the closed form of `V*_1`.
pub fn v1_closed_form<T: Scalar>(params: &InstanceParams<T>) -> T {
    let nf = T::from_usize_lossy(params.n);
    let two = T::lit(2.0);
    two * nf / (nf - T::one() + two * (params.delta + params.big_delta))
}

/// Converged state values, indexed by mask.
#[derive(Clone, Debug)]
pub struct StateValues<T> {
    pub v: Vec<T>,
    pub sweeps: usize,
    pub residual: T,
}

impl<T: Scalar> StateValues<T> {
    pub fn get(&self, state: GlobalState) -> T {
        self.v[state.index()]
    }
}

/// Gauss–Seidel value iteration in ascending mask order until the sup-norm
/// residual is at most `tol·(1 + sup|V|)`. `V(g) = 0` throughout.
pub fn value_iteration<T: Scalar>(
    instance: &Instance<T>,
    policy: &PolicySpec,
    tol: T,
    max_iter: usize,
) -> Result<StateValues<T>> {
    let n = instance.n();
    let states: Vec<GlobalState> = GlobalState::all(n).collect();
    let successors: Vec<Vec<GlobalState>> = states.iter().map(|&s| reachable(s)).collect();

    // Per state, the candidate mismatch-count vectors.
    let candidates: Vec<Vec<Vec<usize>>> = match policy {
        PolicySpec::Optimal => {
            if n > MAX_N_EXHAUSTIVE || instance.d() > MAX_D_EXHAUSTIVE {
                return Err(Error::CapExceeded {
                    what: "n (optimal-by-search value iteration, d ≤ 3)",
                    required: n,
                    cap: MAX_N_EXHAUSTIVE,
                });
            }
            let all: Vec<Vec<usize>> = enumerate_actions(n, instance.width(), 63)?
                .map(|a| mismatch_counts(instance, &a))
                .collect();
            states.iter().map(|_| all.clone()).collect()
        }
        _ => states
            .iter()
            .map(|&s| {
                if s.is_goal() {
                    return Ok(Vec::new());
                }
                let a = policy
                    .action(s)
                    .ok_or_else(|| Error::MissingAction(s.to_string()))?;
                Ok(vec![mismatch_counts(instance, a)])
            })
            .collect::<Result<_>>()?,
    };

    let mut v = vec![T::zero(); states.len()];
    let mut residual = T::infinity();
    for sweep in 1..=max_iter {
        residual = T::zero();
        for (k, &s) in states.iter().enumerate() {
            if s.is_goal() {
                continue;
            }
            let mut best = T::infinity();
            for counts in &candidates[k] {
                let mut q = T::one();
                for &dst in &successors[k] {
                    q += prob_with_counts(instance, s, dst, counts) * v[dst.index()];
                }
                if q < best {
                    best = q;
                }
            }
            residual = residual.max((best - v[k]).abs());
            v[k] = best;
        }
        let scale = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        if residual <= tol * (T::one() + scale) {
            return Ok(StateValues {
                v,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: residual.to_f64_lossy(),
    })
}

/// Value of playing `action` at `state` forever, continuing with `values`
/// after leaving: `(1 + Σ_{s'≠s} P(s'|s,a)·v(s')) / (1 − P(s|s,a))`.
pub fn q_value<T: Scalar>(
    instance: &Instance<T>,
    state: GlobalState,
    action: &GlobalAction,
    values: &[T],
) -> Result<T> {
    q_value_with_counts(instance, state, &mismatch_counts(instance, action), values)
}

fn q_value_with_counts<T: Scalar>(
    instance: &Instance<T>,
    state: GlobalState,
    counts: &[usize],
    values: &[T],
) -> Result<T> {
    if state.is_goal() {
        return Err(Error::OutOfRange {
            what: "state",
            value: state.to_string(),
            range: "non-goal states".into(),
        });
    }
    let mut acc = T::one();
    let mut stay = T::zero();
    for dst in reachable(state) {
        let p = prob_with_counts(instance, state, dst, counts);
        if dst == state {
            stay = p;
        } else {
            acc += p * values[dst.index()];
        }
    }
    if stay >= T::one() {
        return Err(Error::DegenerateSelfLoop(stay.to_f64_lossy()));
    }
    Ok(acc / (T::one() - stay))
}

/// Q-scan outcome at one state.
#[derive(Clone, Debug, Serialize)]
pub struct StateArgmin {
    pub state: String,
    pub min_q: f64,
    /// `Q(a_θ) − min Q`.
    pub a_theta_excess: f64,
    pub argmin_size: usize,
    /// Co-minimizers within tolerance, rendered.
    pub argmin: Vec<String>,
    /// Some co-minimizer differs from `a_θ` in a component of an agent at `s`.
    pub source_agent_tie: bool,
}

/// Result of [`verify_theorem1`].
#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    /// `a_θ` attains the minimum at every non-goal state and every tie is
    /// confined to components of agents at the goal.
    pub argmin_ok: bool,
    /// `max − min` of the brute-force optimal values within each type.
    pub value_spread_per_type: Vec<f64>,
    /// `min V(S_{r+1}) − max V(S_r)` from the brute-force values.
    pub gaps: Vec<f64>,
    /// Type-level recursion values.
    pub v_table: Vec<f64>,
    pub b_star: f64,
    /// Largest `|v_table[type(s)] − V(s)|`.
    pub max_table_gap: f64,
    pub vi_sweeps: usize,
    pub tol: f64,
    pub per_state: Vec<StateArgmin>,
}

impl Theorem1Report {
    pub fn max_spread(&self) -> f64 {
        self.value_spread_per_type
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Brute-force check of the optimal structure: the sign-matching action
/// attains the Bellman minimum everywhere, values depend on the type only,
/// and they increase strictly with the type.
pub fn verify_theorem1<T: Scalar>(instance: &Instance<T>, tol: T) -> Result<Theorem1Report> {
    let n = instance.n();
    if n > MAX_N_EXHAUSTIVE || instance.d() > MAX_D_EXHAUSTIVE {
        return Err(Error::CapExceeded {
            what: "n (exhaustive optimal-structure check, d ≤ 3)",
            required: n,
            cap: MAX_N_EXHAUSTIVE,
        });
    }
    let vi = value_iteration(
        instance,
        &PolicySpec::Optimal,
        T::lit(DEFAULT_VI_TOL),
        DEFAULT_VI_MAX_ITER,
    )?;
    let table = value_table(instance)?;
    let a_theta = optimal_action(instance.theta());
    let actions: Vec<(GlobalAction, Vec<usize>)> = enumerate_actions(n, instance.width(), 63)?
        .map(|a| {
            let c = mismatch_counts(instance, &a);
            (a, c)
        })
        .collect();

    let mut argmin_ok = true;
    let mut per_state = Vec::new();
    for s in GlobalState::all(n).filter(|s| !s.is_goal()) {
        let qs: Vec<T> = actions
            .iter()
            .map(|(_, c)| q_value_with_counts(instance, s, c, &vi.v))
            .collect::<Result<_>>()?;
        let min_q = qs.iter().cloned().fold(T::infinity(), T::min);
        let q_theta = q_value(instance, s, &a_theta, &vi.v)?;
        let mut argmin = Vec::new();
        let mut source_agent_tie = false;
        for ((a, _), &q) in actions.iter().zip(&qs) {
            if q <= min_q + tol {
                argmin.push(a.to_string());
                let differs_at_source = s
                    .source_agents()
                    .any(|i| a.signs().row(i) != a_theta.signs().row(i));
                source_agent_tie |= differs_at_source;
            }
        }
        let in_argmin = q_theta <= min_q + tol;
        argmin_ok &= in_argmin && !source_agent_tie;
        per_state.push(StateArgmin {
            state: s.to_string(),
            min_q: min_q.to_f64_lossy(),
            a_theta_excess: (q_theta - min_q).to_f64_lossy(),
            argmin_size: argmin.len(),
            argmin,
            source_agent_tie,
        });
    }

    let mut lo = vec![T::infinity(); n + 1];
    let mut hi = vec![T::neg_infinity(); n + 1];
    let mut max_table_gap = T::zero();
    for s in GlobalState::all(n) {
        let r = state_type(s);
        let val = vi.get(s);
        lo[r] = lo[r].min(val);
        hi[r] = hi[r].max(val);
        max_table_gap = max_table_gap.max((table.v[r] - val).abs());
    }
    let spread = (0..=n).map(|r| (hi[r] - lo[r]).to_f64_lossy()).collect();
    let gaps = (0..n).map(|r| (lo[r + 1] - hi[r]).to_f64_lossy()).collect();

    Ok(Theorem1Report {
        argmin_ok,
        value_spread_per_type: spread,
        gaps,
        v_table: table.v.iter().map(|x| x.to_f64_lossy()).collect(),
        b_star: table.b_star.to_f64_lossy(),
        max_table_gap: max_table_gap.to_f64_lossy(),
        vi_sweeps: vi.sweeps,
        tol: tol.to_f64_lossy(),
        per_state,
    })
}
