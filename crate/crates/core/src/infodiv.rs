//! Exact path-space KL divergence between an instance and its `j`-flipped
//! neighbour under a stationary policy, and the matching bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{flip_theta, Instance};
use crate::kernel::distribution;
use crate::properties::policy_action;
use crate::scalar::Scalar;
use crate::statespace::GlobalState;
use crate::values::PolicySpec;

/// Largest `n` for the occupancy DP.
pub const MAX_N_OCCUPANCY: usize = 3;
/// Largest horizon for the occupancy DP.
pub const MAX_T_OCCUPANCY: usize = 200;

fn check_scale(n: usize, horizon: usize) -> Result<()> {
    if n > MAX_N_OCCUPANCY {
        return Err(Error::CapExceeded {
            what: "n for the occupancy DP",
            required: n,
            cap: MAX_N_OCCUPANCY,
        });
    }
    if horizon > MAX_T_OCCUPANCY {
        return Err(Error::CapExceeded {
            what: "T for the occupancy DP",
            required: horizon,
            cap: MAX_T_OCCUPANCY,
        });
    }
    Ok(())
}

/// State distribution at times `1..=horizon` from `s_init`; the goal
/// self-loops.
pub fn occupancy<T: Scalar>(
    instance: &Instance<T>,
    policy: &PolicySpec,
    horizon: usize,
) -> Result<Vec<Vec<T>>> {
    let n = instance.n();
    check_scale(n, horizon)?;
    let mut out = Vec::with_capacity(horizon);
    if horizon == 0 {
        return Ok(out);
    }
    let mut mu = vec![T::zero(); 1 << n];
    mu[GlobalState::init(n).index()] = T::one();
    out.push(mu.clone());
    for _ in 1..horizon {
        let mut next = vec![T::zero(); mu.len()];
        next[0] = mu[0];
        for (idx, &m) in mu.iter().enumerate().skip(1) {
            if m == T::zero() {
                continue;
            }
            let s = GlobalState::new(n, idx as u32);
            for (dst, p) in distribution(instance, s, policy_action(policy, s)?) {
                next[dst.index()] += m * p;
            }
        }
        out.push(next.clone());
        mu = next;
    }
    Ok(out)
}

/// `KL(p || q)` over aligned supports; `+∞` if `q` misses mass of `p`.
pub fn kl<T: Scalar>(p: &[T], q: &[T]) -> T {
    let mut acc = T::zero();
    for (&a, &b) in p.iter().zip(q) {
        if a <= T::zero() {
            continue;
        }
        if b <= T::zero() {
            return T::infinity();
        }
        acc += a * (a / b).ln();
    }
    acc
}

/// `Σ (p − q)² / q`.
pub fn chi_square<T: Scalar>(p: &[T], q: &[T]) -> T {
    let mut acc = T::zero();
    for (&a, &b) in p.iter().zip(q) {
        let d = a - b;
        if d == T::zero() {
            continue;
        }
        if b <= T::zero() {
            return T::infinity();
        }
        acc += d * d / b;
    }
    acc
}

fn successor_probs<T: Scalar>(
    instance: &Instance<T>,
    s: GlobalState,
    policy: &PolicySpec,
) -> Result<Vec<T>> {
    Ok(distribution(instance, s, policy_action(policy, s)?)
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

/// `Σ_{t=1}^{T−1} Σ_s μ_t(s)·f(P(·|s,π(s)), Q(·|s,π(s)))` with `μ` the
/// occupancy under `p_inst`.
fn chain_sum<T: Scalar>(
    p_inst: &Instance<T>,
    q_inst: &Instance<T>,
    policy: &PolicySpec,
    horizon: usize,
    f: fn(&[T], &[T]) -> T,
) -> Result<T> {
    let n = p_inst.n();
    let mu = occupancy(p_inst, policy, horizon)?;
    let mut per_state = vec![T::zero(); 1 << n];
    for (idx, slot) in per_state.iter_mut().enumerate().skip(1) {
        let s = GlobalState::new(n, idx as u32);
        *slot = f(
            &successor_probs(p_inst, s, policy)?,
            &successor_probs(q_inst, s, policy)?,
        );
    }
    let mut total = T::zero();
    for m in mu.iter().take(horizon.saturating_sub(1)) {
        for (idx, &w) in m.iter().enumerate().skip(1) {
            if w > T::zero() {
                total += w * per_state[idx];
            }
        }
    }
    Ok(total)
}

/// `KL(P_θ || P_{θʲ})` over state paths of length `horizon` from `s_init`.
pub fn path_kl<T: Scalar>(
    instance: &Instance<T>,
    j: usize,
    policy: &PolicySpec,
    horizon: usize,
) -> Result<T> {
    let flipped = instance.with_theta(flip_theta(instance.theta(), j)?)?;
    chain_sum(instance, &flipped, policy, horizon, kl)
}

/// `3·2^{2n}·Δ² / (δ·(d−1)²) · E[N⁻]`.
pub fn kl_bound<T: Scalar>(instance: &Instance<T>, expected_n_minus: T) -> T {
    let n = instance.n();
    let w = T::from_usize_lossy(instance.width());
    let big = instance.big_delta();
    T::lit(3.0) * T::pow2(2 * n) * big * big / (instance.delta() * w * w) * expected_n_minus
}

#[derive(Clone, Debug, Serialize)]
pub struct NMinus {
    /// `E[Σ_{t≤T} 𝟙{agent i at s at t}]`.
    pub per_agent: Vec<f64>,
    /// `max_i` of the per-agent expectations.
    pub max_of_expectations: f64,
    /// `E[max_i N⁻_i] = Σ_{t≤T} P(s_t ≠ g)`, exact because agents never
    /// return to `s`.
    pub expected_max: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
}

pub fn n_minus_occupancy<T: Scalar>(
    instance: &Instance<T>,
    policy: &PolicySpec,
    horizon: usize,
) -> Result<NMinus> {
    let n = instance.n();
    let mu = occupancy(instance, policy, horizon)?;
    let mut per_agent = vec![0.0; n];
    let mut expected_max = 0.0;
    for m in &mu {
        for (idx, &w) in m.iter().enumerate().skip(1) {
            let w = w.to_f64_lossy();
            expected_max += w;
            let s = GlobalState::new(n, idx as u32);
            for (i, e) in per_agent.iter_mut().enumerate() {
                if s.at_source(i) {
                    *e += w;
                }
            }
        }
    }
    let max_of_expectations = per_agent.iter().copied().fold(0.0, f64::max);
    Ok(NMinus {
        per_agent,
        max_of_expectations,
        expected_max,
        horizon,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KlReport {
    pub kl: f64,
    pub bound: f64,
    pub e_n_minus: f64,
    pub e_n_minus_kind: &'static str,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub policy_tag: String,
    pub j: usize,
    /// `KL(P_{θʲ} || P_θ)`, reported only.
    pub reverse_kl: f64,
    /// Occupancy-weighted `χ²(P_θ || P_{θʲ})`, an upper expression for
    /// `kl`; reported only.
    pub chi_square: f64,
    pub pass: bool,
}

/// `path_kl ≤ kl_bound(E[max_i N⁻_i])` for one `(j, policy, T)`.
pub fn kl_report<T: Scalar>(
    instance: &Instance<T>,
    j: usize,
    policy: &PolicySpec,
    policy_tag: &str,
    horizon: usize,
) -> Result<KlReport> {
    let flipped = instance.with_theta(flip_theta(instance.theta(), j)?)?;
    let kl_val = chain_sum(instance, &flipped, policy, horizon, kl)?.to_f64_lossy();
    let reverse = chain_sum(&flipped, instance, policy, horizon, kl)?.to_f64_lossy();
    let chi = chain_sum(instance, &flipped, policy, horizon, chi_square)?.to_f64_lossy();
    let e = n_minus_occupancy(instance, policy, horizon)?.expected_max;
    let bound = kl_bound(instance, T::lit(e)).to_f64_lossy();
    Ok(KlReport {
        kl: kl_val,
        bound,
        e_n_minus: e,
        e_n_minus_kind: "exact-max",
        horizon,
        policy_tag: policy_tag.to_string(),
        j,
        reverse_kl: reverse,
        chi_square: chi,
        pass: kl_val <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_instance, InstanceParams};
    use crate::signs::SignMatrix;
    use crate::values::optimal_action;

    fn inst(n: usize, big: f64) -> Instance<f64> {
        build_instance(
            InstanceParams::new(n, 2, 0.45, big),
            SignMatrix::filled(n, 1, 1),
        )
        .unwrap()
    }

    fn opt(i: &Instance<f64>) -> PolicySpec {
        PolicySpec::Constant(optimal_action(i.theta()))
    }

    #[test]
    fn bound_examples() {
        let i = inst(2, 0.002);
        assert!((kl_bound(&i, 100.0) - 48.0 * 4e-6 / 0.45 * 100.0).abs() < 1e-15);
        assert_eq!(kl_bound(&i, 0.0), 0.0);
        let i2 = inst(2, 0.001);
        assert!((kl_bound(&i, 7.0) / kl_bound(&i2, 7.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn path_kl_examples() {
        let i = inst(1, 0.001);
        assert_eq!(path_kl(&i, 0, &opt(&i), 1).unwrap(), 0.0);
        let r = kl_report(&i, 0, &opt(&i), "a_theta", 50).unwrap();
        assert!(r.kl > 0.0 && r.pass, "{r:?}");
        assert!(r.kl <= r.chi_square);
        let tiny = inst(1, 1e-9);
        assert!(path_kl(&tiny, 0, &opt(&tiny), 50).unwrap() < 1e-12);
        assert!(path_kl(&i, 1, &opt(&i), 5).is_err());
        assert!(path_kl(&i, 0, &PolicySpec::Optimal, 5).is_err());
    }

    #[test]
    fn n_minus_examples() {
        let i = inst(1, 0.01);
        let one = n_minus_occupancy(&i, &opt(&i), 1).unwrap();
        assert_eq!(one.per_agent, vec![1.0]);
        let long = n_minus_occupancy(&i, &opt(&i), 200).unwrap();
        assert!((long.per_agent[0] - 1.0 / 0.46).abs() < 1e-9);
        let i2 = inst(2, 0.002);
        let mut prev = 0.0;
        for t in [1, 2, 5, 20] {
            let r = n_minus_occupancy(&i2, &opt(&i2), t).unwrap();
            assert!(r.expected_max >= prev && r.expected_max >= r.max_of_expectations);
            prev = r.expected_max;
        }
        assert!(n_minus_occupancy(&i2, &opt(&i2), 201).is_err());
    }
}
