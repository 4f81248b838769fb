//! Closed-form quantities of the regret lower bound.

use serde::Serialize;

use crate::error::Result;
use crate::instance::{Instance, InstanceParams};
use crate::values::{v1_closed_form, value_table};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowerBound {
    /// `d·√δ·√(K·B*/n) / 2^{n+9}`.
    pub bound: f64,
    /// Episodes needed for the bound to apply:
    /// `n(d−1)²δ / (2^{10}·B*·((1−2δ)/(1+n+n²))²)`.
    pub k_threshold: f64,
    /// `K > k_threshold`.
    pub valid: bool,
}

pub fn lower_bound_value(instance: &Instance<f64>, k_episodes: usize) -> Result<LowerBound> {
    let b_star = value_table(instance)?.b_star;
    Ok(lower_bound_from(instance.params(), b_star, k_episodes))
}

pub fn lower_bound_from(
    params: &InstanceParams<f64>,
    b_star: f64,
    k_episodes: usize,
) -> LowerBound {
    let n = params.n as f64;
    let d = params.d as f64;
    let delta = params.delta;
    let k = k_episodes as f64;
    let bound = d * delta.sqrt() * (k * b_star / n).sqrt() / 2f64.powi(params.n as i32 + 9);
    let ratio = (1.0 - 2.0 * delta) / (1.0 + n + n * n);
    let k_threshold = n * (d - 1.0).powi(2) * delta / (1024.0 * b_star * ratio * ratio);
    LowerBound {
        bound,
        k_threshold,
        valid: k > k_threshold,
    }
}

/// `(d−1)·√δ / (2^{n+5}·√(K·v1))`.
pub fn delta_star(n: usize, d: usize, delta: f64, k_episodes: usize, v1: f64) -> f64 {
    (d as f64 - 1.0) * delta.sqrt() / (2f64.powi(n as i32 + 5) * (k_episodes as f64 * v1).sqrt())
}

/// `Δ*` evaluated at the `V*_1` of the instance it defines: the fixed point
/// of `Δ ↦ delta_star(…, V*_1(Δ))`, starting from `Δ = 0`.
pub fn self_consistent_delta_star(n: usize, d: usize, delta: f64, k_episodes: usize) -> f64 {
    let mut big = 0.0;
    for _ in 0..200 {
        let v1 = v1_closed_form(&InstanceParams::new(n, d, delta, big));
        let next = delta_star(n, d, delta, k_episodes, v1);
        if (next - big).abs() <= 1e-18 {
            return next;
        }
        big = next;
    }
    big
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_instance, delta_max};
    use crate::signs::SignMatrix;
    use approx::assert_relative_eq;

    #[test]
    fn bound_examples() {
        let params = InstanceParams::new(1, 2, 0.45, 0.01);
        let b = lower_bound_from(&params, 1.0 / 0.46, 1000);
        // 2·√0.45·√(1000/0.46)/2^10
        let expect = 2.0 * 0.45f64.sqrt() * (1000.0 / 0.46f64).sqrt() / 1024.0;
        assert_relative_eq!(b.bound, expect, max_relative = 1e-14);
        assert!((b.bound - 0.0610).abs() < 1e-4);
        assert!((b.k_threshold - 0.18).abs() < 0.01);
        assert!(b.valid);
        let b4 = lower_bound_from(&params, 1.0 / 0.46, 4000);
        assert_relative_eq!(b4.bound, 2.0 * b.bound, max_relative = 1e-14);
    }

    #[test]
    fn bound_from_instance_uses_b_star() {
        let inst = build_instance(
            InstanceParams::new(1, 2, 0.45, 0.01),
            SignMatrix::filled(1, 1, 1),
        )
        .unwrap();
        let b = lower_bound_value(&inst, 1000).unwrap();
        assert_relative_eq!(
            b.bound,
            lower_bound_from(inst.params(), 1.0 / 0.46, 1000).bound,
            max_relative = 1e-12
        );
    }

    #[test]
    fn delta_star_examples() {
        let ds = delta_star(1, 2, 0.45, 1000, 1.0 / 0.46);
        assert!((ds - 2.25e-4).abs() < 0.01e-4, "{ds}");
        assert!(ds < delta_max(1, 0.45).unwrap());
        assert!(delta_star(1, 2, 0.45, 1_000_000, 2.0) < delta_star(1, 2, 0.45, 1000, 2.0) / 31.0);

        let fixed = self_consistent_delta_star(1, 2, 0.45, 1000);
        let v1 = 1.0 / (0.45 + fixed);
        assert_relative_eq!(
            fixed,
            delta_star(1, 2, 0.45, 1000, v1),
            max_relative = 1e-12
        );
    }
}
