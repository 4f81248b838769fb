//! Global states as bitmasks, joint actions, the type partition and
//! one-step reachability on the two-node network.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::signs::SignMatrix;

/// Assignment of `n` agents to the nodes `{s, g}`. Bit `i` set means agent
/// `i` is still at the start node `s`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState {
    mask: u32,
    n: u8,
}

impl GlobalState {
    pub fn new(n: usize, mask: u32) -> Self {
        assert!((1..=30).contains(&n), "agent count {n} outside 1..=30");
        assert!(
            mask < (1u32 << n),
            "mask {mask:#b} has bits beyond {n} agents"
        );
        Self { mask, n: n as u8 }
    }

    /// Every agent at `s`.
    pub fn init(n: usize) -> Self {
        Self::new(n, (1u32 << n) - 1)
    }

    /// Every agent at `g`.
    pub fn goal(n: usize) -> Self {
        Self::new(n, 0)
    }

    #[inline]
    pub fn mask(self) -> u32 {
        self.mask
    }

    #[inline]
    pub fn n(self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn index(self) -> usize {
        self.mask as usize
    }

    #[inline]
    pub fn is_goal(self) -> bool {
        self.mask == 0
    }

    #[inline]
    pub fn is_init(self) -> bool {
        self.mask == (1u32 << self.n) - 1
    }

    #[inline]
    pub fn at_source(self, agent: usize) -> bool {
        (self.mask >> agent) & 1 == 1
    }

    /// Agents at `s`, ascending.
    pub fn source_agents(self) -> impl Iterator<Item = usize> {
        let mask = self.mask;
        (0..self.n as usize).filter(move |i| (mask >> i) & 1 == 1)
    }

    /// All `2^n` states in ascending mask order.
    pub fn all(n: usize) -> impl Iterator<Item = GlobalState> {
        (0..1u32 << n).map(move |m| GlobalState::new(n, m))
    }
}

/// Number of agents at `s`.
#[inline]
pub fn state_type(state: GlobalState) -> usize {
    state.mask.count_ones() as usize
}

impl fmt::Display for GlobalState {
    /// Agent 1 leftmost, `1` = at `s`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n() {
            f.write_str(if self.at_source(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GlobalState({self})")
    }
}

/// Submasks of `mask`, ascending.
pub fn submasks(mask: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(1 << mask.count_ones());
    let mut sub = mask;
    loop {
        out.push(sub);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & mask;
    }
    out.reverse();
    out
}

/// States reachable in one step: every subset of the agents at `s` may
/// leave, agents at `g` stay. The goal only reaches itself.
pub fn reachable(state: GlobalState) -> Vec<GlobalState> {
    submasks(state.mask)
        .into_iter()
        .map(|m| GlobalState::new(state.n(), m))
        .collect()
}

/// Reachable states of type `r_next`; empty when `r_next` exceeds the
/// source type.
pub fn reachable_of_type(state: GlobalState, r_next: usize) -> Vec<GlobalState> {
    if r_next > state_type(state) {
        return Vec::new();
    }
    submasks(state.mask)
        .into_iter()
        .filter(|m| m.count_ones() as usize == r_next)
        .map(|m| GlobalState::new(state.n(), m))
        .collect()
}

/// Who stays and who moves on one transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentPartition {
    /// Agents at `s` in the source state.
    pub at_source: BTreeSet<usize>,
    /// Agents at `g` in the source state.
    pub at_goal: BTreeSet<usize>,
    /// Agents moving `s → g`.
    pub movers: BTreeSet<usize>,
    /// Complement of `movers` among all agents.
    pub non_movers: BTreeSet<usize>,
    /// `|at_source|`.
    pub r: usize,
    /// `|at_source \ movers|`.
    pub r_next: usize,
}

/// `None` when some agent would return from `g` to `s`.
pub fn transition_partition(src: GlobalState, dst: GlobalState) -> Option<AgentPartition> {
    assert_eq!(src.n, dst.n, "states over different agent counts");
    if dst.mask & !src.mask != 0 {
        return None;
    }
    let n = src.n();
    let bits = |m: u32| -> BTreeSet<usize> { (0..n).filter(|i| (m >> i) & 1 == 1).collect() };
    let full = (1u32 << n) - 1;
    let moved = src.mask & !dst.mask;
    Some(AgentPartition {
        at_source: bits(src.mask),
        at_goal: bits(full & !src.mask),
        movers: bits(moved),
        non_movers: bits(full & !moved),
        r: state_type(src),
        r_next: state_type(dst),
    })
}

/// Joint action: one `±1` vector of length `d − 1` per agent.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GlobalAction(pub SignMatrix);

impl GlobalAction {
    pub fn signs(&self) -> &SignMatrix {
        &self.0
    }

    pub fn get(&self, agent: usize, p: usize) -> i8 {
        self.0.get(agent, p)
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn width(&self) -> usize {
        self.0.cols()
    }
}

impl fmt::Display for GlobalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// All `2^{n(d−1)}` joint actions in lexicographic order.
pub fn enumerate_actions(
    n: usize,
    width: usize,
    cap: usize,
) -> Result<impl Iterator<Item = GlobalAction>> {
    let m = n * width;
    if m > cap || m > 63 {
        return Err(Error::CapExceeded {
            what: "n·(d−1) for action enumeration",
            required: m,
            cap,
        });
    }
    Ok((0..1u64 << m).map(move |idx| GlobalAction(SignMatrix::from_index(n, width, idx))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(n: usize, m: u32) -> GlobalState {
        GlobalState::new(n, m)
    }

    #[test]
    fn type_examples() {
        assert_eq!(state_type(st(3, 0b111)), 3);
        assert_eq!(state_type(st(3, 0)), 0);
        assert_eq!(state_type(st(3, 0b101)), 2);
        assert!(st(3, 0b111).is_init());
        assert!(st(3, 0).is_goal());
    }

    #[test]
    fn rendering_agent_one_leftmost() {
        assert_eq!(st(3, 0b011).to_string(), "110");
        assert_eq!(st(2, 0b10).to_string(), "01");
    }

    #[test]
    fn reachable_examples() {
        let r: Vec<u32> = reachable(st(2, 0b11)).iter().map(|s| s.mask()).collect();
        assert_eq!(r, vec![0b00, 0b01, 0b10, 0b11]);
        assert_eq!(reachable(st(2, 0)), vec![st(2, 0)]);
    }

    #[test]
    fn reachable_of_type_examples() {
        assert_eq!(reachable_of_type(st(3, 0b111), 2).len(), 3);
        assert_eq!(reachable_of_type(st(3, 0b101), 0), vec![st(3, 0)]);
        assert!(reachable_of_type(st(3, 0b001), 3).is_empty());
    }

    #[test]
    fn partition_examples() {
        let p = transition_partition(st(2, 0b11), st(2, 0b01)).unwrap();
        assert_eq!(p.at_source, BTreeSet::from([0, 1]));
        assert_eq!(p.movers, BTreeSet::from([1]));
        assert_eq!((p.r, p.r_next), (2, 1));

        assert!(transition_partition(st(2, 0b01), st(2, 0b11)).is_none());

        let p = transition_partition(st(2, 0b10), st(2, 0b10)).unwrap();
        assert!(p.movers.is_empty());
        assert_eq!((p.r, p.r_next), (1, 1));
        assert_eq!(p.at_goal, BTreeSet::from([0]));
    }

    #[test]
    fn reachability_is_subset_relation_brute_force() {
        for n in 1..=6 {
            for src in GlobalState::all(n) {
                let reach: BTreeSet<_> = reachable(src).into_iter().collect();
                let r = state_type(src);
                assert_eq!(reach.len(), 1 << r);
                let by_type: usize = (0..=r).map(|k| reachable_of_type(src, k).len()).sum();
                assert_eq!(by_type, 1 << r);
                for dst in GlobalState::all(n) {
                    let subset = dst.mask() & !src.mask() == 0;
                    assert_eq!(reach.contains(&dst), subset);
                    assert_eq!(transition_partition(src, dst).is_some(), subset);
                }
            }
        }
    }

    #[test]
    fn action_space_size() {
        assert_eq!(enumerate_actions(2, 2, 20).unwrap().count(), 16);
        assert!(enumerate_actions(11, 2, 20).is_err());
    }
}
