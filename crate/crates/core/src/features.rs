//! Feature maps of the linear-mixture transition model and the
//! inner-product kernel `P(s'|s,a) = ⟨φ(s'|s,a), θ⟩`.
//!
//! This is the reference model. The production kernel in
//! [`crate::kernel`] is a closed form derived from it and is checked
//! against it pointwise.

use crate::instance::{Instance, InstanceParams};
use crate::scalar::Scalar;
use crate::statespace::{state_type, GlobalAction, GlobalState};

/// What one agent does on a transition. Moving from `g` back to `s` is
/// not representable: such transitions have the zero global feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentMove {
    /// `s → s`
    StayAtSource,
    /// `s → g`
    ToGoal,
    /// `g → g`
    StayAtGoal,
}

impl AgentMove {
    /// `None` for the disallowed `g → s` move.
    pub fn from_flags(at_source: bool, stays: bool) -> Option<Self> {
        match (at_source, stays) {
            (true, true) => Some(Self::StayAtSource),
            (true, false) => Some(Self::ToGoal),
            (false, true) => Some(Self::StayAtGoal),
            (false, false) => None,
        }
    }
}

/// Per-agent feature of length `d`, where `r` is the type of the source
/// state.
pub fn individual_feature<T: Scalar>(
    mv: AgentMove,
    action: &[i8],
    r: usize,
    n: usize,
    delta: T,
) -> Vec<T> {
    let nf = T::from_usize_lossy(n);
    let sign = |s: i8| T::from_i8(s).unwrap();
    let mut out: Vec<T> = Vec::with_capacity(action.len() + 1);
    match mv {
        AgentMove::StayAtSource => {
            debug_assert!(r >= 1);
            out.extend(action.iter().map(|&s| -sign(s)));
            out.push((T::one() - delta) / (nf * T::pow2(r - 1)));
        }
        AgentMove::ToGoal => {
            debug_assert!(r >= 1);
            out.extend(action.iter().map(|&s| sign(s)));
            out.push(delta / (nf * T::pow2(r - 1)));
        }
        AgentMove::StayAtGoal => {
            out.extend(action.iter().map(|_| T::zero()));
            out.push(T::one() / (nf * T::pow2(r)));
        }
    }
    out
}

/// Global feature `φ(dst | src, action)` of length `n·d`.
pub fn global_feature<T: Scalar>(
    params: &InstanceParams<T>,
    src: GlobalState,
    action: &GlobalAction,
    dst: GlobalState,
) -> Vec<T> {
    let n = params.n;
    let d = params.d;
    let mut out = vec![T::zero(); n * d];
    if src.is_goal() {
        if dst.is_goal() {
            out[n * d - 1] = T::one();
        }
        return out;
    }
    // Any agent returning to s zeroes the whole vector.
    if dst.mask() & !src.mask() != 0 {
        return out;
    }
    let r = state_type(src);
    for i in 0..n {
        let mv = AgentMove::from_flags(src.at_source(i), src.at_source(i) == dst.at_source(i))
            .expect("return moves excluded above");
        let block = individual_feature(mv, action.signs().row(i), r, n, params.delta);
        out[i * d..(i + 1) * d].copy_from_slice(&block);
    }
    out
}

/// `⟨φ(dst | src, action), (θ₁, 1, …, θ_n, 1)⟩`.
pub fn prob_inner<T: Scalar>(
    instance: &Instance<T>,
    src: GlobalState,
    action: &GlobalAction,
    dst: GlobalState,
) -> T {
    let phi = global_feature(instance.params(), src, action, dst);
    phi.iter()
        .zip(instance.padded_theta())
        .map(|(&f, &t)| f * t)
        .sum()
}
