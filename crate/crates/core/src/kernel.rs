//! Closed-form transition kernel and the distribution-validity verifier.
//!
//! For a source state with agent set `I` at `s` (`|I| = r`) and movers
//! `T ⊆ I` (`r' = |I \ T|`):
//!
//! ```text
//! P = [r' + (r − 2r')δ] / (n·2^{r−1}) + (n − r)/(n·2^r) + (Δ/n)(r − 2r')
//!     + 2Δ/(n(d−1)) · Σ_p [ #mismatch(I ∩ T', p) − #mismatch(T, p) ]
//! ```
//!
//! Under the sign-matching action the correction term vanishes and the
//! probability depends on `(r, r')` only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::prob_inner;
use crate::instance::Instance;
use crate::scalar::Scalar;
use crate::signs::SignMatrix;
use crate::statespace::{enumerate_actions, reachable, state_type, GlobalAction, GlobalState};

/// Default largest `n` for exhaustive kernel validation.
pub const DEFAULT_MAX_N_EXHAUSTIVE: usize = 4;
/// Largest `d` for exhaustive kernel validation.
pub const MAX_D_EXHAUSTIVE: usize = 3;
/// Sample size when validation cannot enumerate.
pub const VALIDATION_SAMPLES: usize = 10_000;
pub const DEFAULT_VALIDATION_SEED: u64 = 0x5eed_0001;

/// Per-agent count of action components whose sign disagrees with `θ`.
pub fn mismatch_counts<T: Scalar>(instance: &Instance<T>, action: &GlobalAction) -> Vec<usize> {
    let theta = &instance.theta().signs;
    (0..instance.n())
        .map(|i| theta.row_mismatches(action.signs(), i))
        .collect()
}

/// Part of the closed form that does not depend on the action.
#[inline]
fn base_prob<T: Scalar>(instance: &Instance<T>, r: usize, r_next: usize) -> T {
    let n = instance.n();
    let nf = T::from_usize_lossy(n);
    let delta = instance.delta();
    let big = instance.big_delta();
    let rf = T::from_usize_lossy(r);
    let rn = T::from_usize_lossy(r_next);
    let spread = T::from_i64(r as i64 - 2 * r_next as i64).unwrap();
    (rn + spread * delta) / (nf * T::pow2(r - 1))
        + (nf - rf) / (nf * T::pow2(r))
        + big / nf * spread
}

/// Closed-form probability given precomputed [`mismatch_counts`].
#[inline]
pub fn prob_with_counts<T: Scalar>(
    instance: &Instance<T>,
    src: GlobalState,
    dst: GlobalState,
    counts: &[usize],
) -> T {
    if src.is_goal() {
        return if dst.is_goal() { T::one() } else { T::zero() };
    }
    if dst.mask() & !src.mask() != 0 {
        return T::zero();
    }
    let r = state_type(src);
    let r_next = state_type(dst);
    let mut imbalance: i64 = 0;
    for i in src.source_agents() {
        if dst.at_source(i) {
            imbalance += counts[i] as i64;
        } else {
            imbalance -= counts[i] as i64;
        }
    }
    base_prob(instance, r, r_next) + penalty_unit(instance) * T::from_i64(imbalance).unwrap()
}

/// `2Δ / (n(d−1))`, the change caused by one flipped action component.
#[inline]
pub fn penalty_unit<T: Scalar>(instance: &Instance<T>) -> T {
    T::lit(2.0) * instance.big_delta() / T::from_usize_lossy(instance.n() * instance.width())
}

/// Production kernel `P(dst | src, action)`.
pub fn prob_closed<T: Scalar>(
    instance: &Instance<T>,
    src: GlobalState,
    action: &GlobalAction,
    dst: GlobalState,
) -> T {
    prob_with_counts(instance, src, dst, &mismatch_counts(instance, action))
}

/// Successor distribution over `reachable(src)` in ascending mask order.
pub fn distribution<T: Scalar>(
    instance: &Instance<T>,
    src: GlobalState,
    action: &GlobalAction,
) -> Vec<(GlobalState, T)> {
    let counts = mismatch_counts(instance, action);
    reachable(src)
        .into_iter()
        .map(|dst| (dst, prob_with_counts(instance, src, dst, &counts)))
        .collect()
}

/// `p*_{r,r'}`: probability of reaching one fixed type-`r'` successor from
/// a type-`r` state under the sign-matching action.
pub fn p_star<T: Scalar>(instance: &Instance<T>, r: usize, r_next: usize) -> Result<T> {
    if r < 1 || r > instance.n() || r_next > r {
        return Err(Error::OutOfRange {
            what: "(r, r')",
            value: format!("({r}, {r_next})"),
            range: format!("0 ≤ r' ≤ r, 1 ≤ r ≤ {}", instance.n()),
        });
    }
    Ok(base_prob(instance, r, r_next))
}

/// `P(src | src, action)`; smallest under the sign-matching action.
pub fn self_prob<T: Scalar>(
    instance: &Instance<T>,
    src: GlobalState,
    action: &GlobalAction,
) -> Result<T> {
    if src.is_goal() {
        return Err(Error::OutOfRange {
            what: "state",
            value: src.to_string(),
            range: "non-goal states".into(),
        });
    }
    Ok(prob_closed(instance, src, action, src))
}

/// Outcome of [`validate_kernel`].
#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    /// Largest `|Σ_{s'} P(s'|s,a) − 1|` over checked `(s, a)`.
    pub max_simplex_dev: f64,
    /// Smallest probability over feasible checked transitions.
    pub min_prob: f64,
    pub max_prob: f64,
    /// Largest `|closed − inner|` over checked triples.
    pub max_model_gap: f64,
    pub checked_triples: u64,
    /// Sampling seed, `None` for exhaustive runs.
    pub seed: Option<u64>,
    pub exhaustive: bool,
    /// Feasible transitions with negative probability (either model).
    pub negative_count: u64,
    /// Infeasible transitions whose probability was exactly 0.
    pub infeasible_zero_count: u64,
    /// Infeasible transitions with non-zero probability (either model).
    pub infeasible_nonzero_count: u64,
    /// `P(g | g, a) == 1` exactly, in both models, for every checked `a`.
    pub goal_certain: bool,
}

impl KernelReport {
    /// All validity conditions at tolerance `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_simplex_dev <= tol
            && self.max_model_gap <= tol
            && self.negative_count == 0
            && self.max_prob <= 1.0
            && self.infeasible_nonzero_count == 0
            && self.goal_certain
    }

    /// First failing condition, for human summaries.
    pub fn failure(&self, tol: f64) -> Option<String> {
        if self.negative_count > 0 {
            Some(format!(
                "negative probability ({} transitions, min {:e})",
                self.negative_count, self.min_prob
            ))
        } else if self.max_prob > 1.0 {
            Some(format!("probability above one ({:e})", self.max_prob))
        } else if self.max_simplex_dev > tol {
            Some(format!(
                "simplex deviation {:e} > {tol:e}",
                self.max_simplex_dev
            ))
        } else if self.max_model_gap > tol {
            Some(format!(
                "closed/inner model gap {:e} > {tol:e}",
                self.max_model_gap
            ))
        } else if self.infeasible_nonzero_count > 0 {
            Some("infeasible transition with non-zero probability".into())
        } else if !self.goal_certain {
            Some("goal self-transition not exactly 1".into())
        } else {
            None
        }
    }
}

#[derive(Default)]
struct Accumulator {
    max_simplex_dev: f64,
    min_prob: f64,
    max_prob: f64,
    max_model_gap: f64,
    checked: u64,
    negative: u64,
    infeasible_zero: u64,
    infeasible_nonzero: u64,
    goal_certain: bool,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            min_prob: f64::INFINITY,
            max_prob: f64::NEG_INFINITY,
            goal_certain: true,
            ..Default::default()
        }
    }

    fn triple<T: Scalar>(
        &mut self,
        instance: &Instance<T>,
        src: GlobalState,
        action: &GlobalAction,
        counts: &[usize],
        dst: GlobalState,
    ) -> T {
        let closed = prob_with_counts(instance, src, dst, counts);
        let inner = prob_inner(instance, src, action, dst);
        self.checked += 1;
        self.max_model_gap = self
            .max_model_gap
            .max((closed - inner).abs().to_f64_lossy());
        let feasible = dst.mask() & !src.mask() == 0;
        if feasible {
            let (c, i) = (closed.to_f64_lossy(), inner.to_f64_lossy());
            self.min_prob = self.min_prob.min(c).min(i);
            self.max_prob = self.max_prob.max(c).max(i);
            if c < 0.0 || i < 0.0 {
                self.negative += 1;
            }
            if src.is_goal() && !(closed == T::one() && inner == T::one()) {
                self.goal_certain = false;
            }
        } else if closed == T::zero() && inner == T::zero() {
            self.infeasible_zero += 1;
        } else {
            self.infeasible_nonzero += 1;
        }
        closed
    }

    fn finish(self, seed: Option<u64>) -> KernelReport {
        KernelReport {
            max_simplex_dev: self.max_simplex_dev,
            min_prob: self.min_prob,
            max_prob: self.max_prob,
            max_model_gap: self.max_model_gap,
            checked_triples: self.checked,
            seed,
            exhaustive: seed.is_none(),
            negative_count: self.negative,
            infeasible_zero_count: self.infeasible_zero,
            infeasible_nonzero_count: self.infeasible_nonzero,
            goal_certain: self.goal_certain,
        }
    }
}

/// Checks non-negativity, normalisation, exact zeros/ones and agreement
/// with the inner-product model. Enumerates every `(s, a, s')` when
/// `n ≤ max_n_exhaustive` and `d ≤ 3`; otherwise samples
/// [`VALIDATION_SAMPLES`] triples with `seed`.
pub fn validate_kernel<T: Scalar>(
    instance: &Instance<T>,
    max_n_exhaustive: usize,
    seed: u64,
) -> Result<KernelReport> {
    let n = instance.n();
    let w = instance.width();
    if n <= max_n_exhaustive && instance.d() <= MAX_D_EXHAUSTIVE {
        let mut acc = Accumulator::new();
        let actions: Vec<GlobalAction> = enumerate_actions(n, w, 63)?.collect();
        for src in GlobalState::all(n) {
            for action in &actions {
                let counts = mismatch_counts(instance, action);
                let mut total = T::zero();
                for dst in GlobalState::all(n) {
                    total += acc.triple(instance, src, action, &counts, dst);
                }
                acc.max_simplex_dev = acc
                    .max_simplex_dev
                    .max((total - T::one()).abs().to_f64_lossy());
            }
        }
        return Ok(acc.finish(None));
    }
    if n > 20 {
        return Err(Error::CapExceeded {
            what: "agent count for sampled kernel validation",
            required: n,
            cap: 20,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Accumulator::new();
    for _ in 0..VALIDATION_SAMPLES {
        let src = GlobalState::new(n, rng.random_range(0..1u32 << n));
        let mut signs = SignMatrix::filled(n, w, 1);
        for i in 0..n {
            for p in 0..w {
                if rng.random::<bool>() {
                    signs.set(i, p, -1);
                }
            }
        }
        let action = GlobalAction(signs);
        let counts = mismatch_counts(instance, &action);
        let dst = if rng.random_bool(0.9) {
            let reach = reachable(src);
            reach[rng.random_range(0..reach.len())]
        } else {
            GlobalState::new(n, rng.random_range(0..1u32 << n))
        };
        acc.triple(instance, src, &action, &counts, dst);
        let total: T = reachable(src)
            .into_iter()
            .map(|d| prob_with_counts(instance, src, d, &counts))
            .sum();
        acc.max_simplex_dev = acc
            .max_simplex_dev
            .max((total - T::one()).abs().to_f64_lossy());
    }
    Ok(acc.finish(Some(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_instance, delta_max, InstanceParams};
    use crate::statespace::reachable_of_type;
    use approx::assert_relative_eq;

    fn n2() -> Instance<f64> {
        build_instance(
            InstanceParams::new(2, 2, 0.45, 0.002),
            SignMatrix::filled(2, 1, 1),
        )
        .unwrap()
    }

    fn n1() -> Instance<f64> {
        build_instance(
            InstanceParams::new(1, 2, 0.45, 0.01),
            SignMatrix::filled(1, 1, 1),
        )
        .unwrap()
    }

    fn a_theta(inst: &Instance<f64>) -> GlobalAction {
        GlobalAction(inst.theta().signs.clone())
    }

    #[test]
    fn closed_form_examples() {
        let inst = n2();
        let a = a_theta(&inst);
        let s0 = GlobalState::init(2);
        // (2 − 0.9)/4 − 0.002
        assert_relative_eq!(prob_closed(&inst, s0, &a, s0), 0.273, epsilon = 1e-15);
        for dst in reachable_of_type(s0, 1) {
            assert_relative_eq!(prob_closed(&inst, s0, &a, dst), 0.25, epsilon = 1e-15);
        }
        // 0.9/4 + 0.002
        assert_relative_eq!(
            prob_closed(&inst, s0, &a, GlobalState::goal(2)),
            0.227,
            epsilon = 1e-15
        );
    }

    #[test]
    fn p_star_examples() {
        let inst = n2();
        assert_relative_eq!(p_star(&inst, 1, 1).unwrap(), 0.524, epsilon = 1e-15);
        assert_relative_eq!(p_star(&inst, 1, 0).unwrap(), 0.476, epsilon = 1e-15);
        assert_relative_eq!(p_star(&n1(), 1, 0).unwrap(), 0.46, epsilon = 1e-15);
        assert!(p_star(&inst, 0, 0).is_err());
        assert!(p_star(&inst, 1, 2).is_err());
        assert!(p_star(&inst, 3, 0).is_err());
    }

    #[test]
    fn p_star_normalises() {
        let inst = build_instance(
            InstanceParams::new(4, 3, 0.42, 0.9 * delta_max(4, 0.42).unwrap()),
            SignMatrix::from_index(4, 2, 77),
        )
        .unwrap();
        for r in 1..=4 {
            let total: f64 = (0..=r)
                .map(|k| crate::scalar::binomial::<f64>(r, k) * p_star(&inst, r, k).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-14, "r = {r}: {total}");
        }
    }

    #[test]
    fn self_prob_examples() {
        let inst = n1();
        let s = GlobalState::init(1);
        assert_relative_eq!(
            self_prob(&inst, s, &a_theta(&inst)).unwrap(),
            0.54,
            epsilon = 1e-15
        );
        let bad = GlobalAction(SignMatrix::filled(1, 1, -1));
        assert_relative_eq!(self_prob(&inst, s, &bad).unwrap(), 0.56, epsilon = 1e-15);
        assert!(self_prob(&inst, GlobalState::goal(1), &bad).is_err());

        let inst = n2();
        for r in 1..=2 {
            let src = GlobalState::new(2, if r == 1 { 0b10 } else { 0b11 });
            assert_eq!(
                self_prob(&inst, src, &a_theta(&inst)).unwrap(),
                p_star(&inst, r, r).unwrap()
            );
        }
    }

    #[test]
    fn single_flip_moves_probability_by_one_unit() {
        let inst = build_instance(
            InstanceParams::new(3, 3, 0.45, 0.5 * delta_max(3, 0.45).unwrap()),
            SignMatrix::from_index(3, 2, 21),
        )
        .unwrap();
        let unit = penalty_unit(&inst);
        let a = a_theta(&inst);
        let src = GlobalState::new(3, 0b111);
        let dst = GlobalState::new(3, 0b011);
        // agent 0 stays, agent 2 moves
        let base = prob_closed(&inst, src, &a, dst);
        let mut stay_flip = a.clone();
        stay_flip.0.set(0, 1, -a.get(0, 1));
        assert_relative_eq!(
            prob_closed(&inst, src, &stay_flip, dst) - base,
            unit,
            epsilon = 1e-15
        );
        let mut move_flip = a.clone();
        move_flip.0.set(2, 0, -a.get(2, 0));
        assert_relative_eq!(
            prob_closed(&inst, src, &move_flip, dst) - base,
            -unit,
            epsilon = 1e-15
        );
    }

    #[test]
    fn validation_exhaustive_passes() {
        let rep = validate_kernel(&n2(), DEFAULT_MAX_N_EXHAUSTIVE, 0).unwrap();
        assert!(rep.exhaustive);
        // 4 states × 4 joint actions × 4 successors
        assert_eq!(rep.checked_triples, 4 * 4 * 4);
        assert!(rep.passes(1e-12), "{rep:?}");
        // 9 of the 16 (s, s') pairs are feasible (3^n).
        assert_eq!(rep.infeasible_zero_count, 4 * (16 - 9));
    }

    #[test]
    fn validation_flags_negative_probability() {
        // δ/2^{n−1} < Δ makes the all-move transition negative under a
        // fully mismatched action.
        let inst = Instance::unchecked(
            InstanceParams::new(2, 2, 0.45, 0.3),
            SignMatrix::filled(2, 1, 1),
        )
        .unwrap();
        let rep = validate_kernel(&inst, DEFAULT_MAX_N_EXHAUSTIVE, 0).unwrap();
        assert!(rep.negative_count > 0);
        assert!(rep.failure(1e-12).unwrap().contains("negative probability"));
    }

    #[test]
    fn validation_sampled_beyond_cap() {
        let inst: Instance<f64> = build_instance(
            InstanceParams::new(6, 4, 0.45, 0.5 * delta_max(6, 0.45).unwrap()),
            SignMatrix::from_index(6, 3, 12345),
        )
        .unwrap();
        let rep = validate_kernel(&inst, DEFAULT_MAX_N_EXHAUSTIVE, 42).unwrap();
        assert!(!rep.exhaustive);
        assert_eq!(rep.seed, Some(42));
        assert_eq!(rep.checked_triples, VALIDATION_SAMPLES as u64);
        assert!(rep.passes(1e-12), "{rep:?}");
    }

    #[test]
    fn f32_kernel_agrees_loosely() {
        let inst64 = n2();
        let inst32: Instance<f32> = inst64.cast();
        let rep = validate_kernel(&inst32, DEFAULT_MAX_N_EXHAUSTIVE, 0).unwrap();
        assert!(rep.passes(1e-6), "{rep:?}");
    }
}
