use massp_core::infodiv::{kl_report, n_minus_occupancy, path_kl};
use massp_core::instance::build_instance;
use massp_core::kernel::distribution;
use massp_core::properties::{
    check_lemma3, check_lemma6, check_lemma8, check_lemmas, episode_tail, lemma6_exact,
    lemma8_floor, Verdict,
};
use massp_core::sim::{Learner, PolicyLearner};
use massp_core::values::{fully_mismatched_action, optimal_action, PolicySpec};
use massp_core::InstanceParams;
use massp_core::{GlobalState, Instance, SignMatrix};
use proptest::prelude::*;

fn inst(n: usize, d: usize, delta: f64, frac: f64) -> Instance {
    let params = InstanceParams::with_fraction(n, d, delta, frac).unwrap();
    build_instance(params, SignMatrix::filled(n, d - 1, 1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lemma3_slack_positive_up_to_six_agents(
        n in 2usize..=6,
        delta in 0.401f64..0.499,
        frac in 0.01f64..0.99,
    ) {
        let r = check_lemma3(&inst(n, 2, delta, frac)).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn lemma8_floor_dominates_half(n in 1usize..=50, delta in 0.401f64..0.499) {
        prop_assert!(lemma8_floor(n, delta) > 0.5);
    }
}

#[test]
fn episode_tail_composes() {
    let i = inst(3, 2, 0.45, 0.5);
    let pol = PolicySpec::Constant(fully_mismatched_action(i.theta()));
    for mask in 1..8 {
        let s = GlobalState::new(3, mask);
        for x in 1..8 {
            let lhs = episode_tail(&i, &pol, s, x + 1).unwrap();
            let rhs: f64 = distribution(&i, s, pol.action(s).unwrap())
                .into_iter()
                .filter(|(d, _)| !d.is_goal())
                .map(|(d, p)| p * episode_tail(&i, &pol, d, x).unwrap())
                .sum();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }
    assert_eq!(
        episode_tail(&i, &pol, GlobalState::goal(3), 1).unwrap(),
        0.0
    );
}

#[test]
fn lemma6_monte_carlo_agrees_with_exact() {
    for n in [1, 2] {
        let i = inst(n, 2, 0.45, 0.5);
        let a = optimal_action(i.theta());
        let pol = PolicySpec::Constant(a.clone());
        let exact = lemma6_exact(&i, &pol, 20).unwrap();
        let factory = |_: &Instance| -> Box<dyn Learner> {
            Box::new(PolicyLearner::new(
                PolicySpec::Constant(a.clone()),
                "a_theta",
            ))
        };
        let mc = check_lemma6(&i, &factory, 20, 3000, 8).unwrap();
        assert!(mc.pass);
        for agent in 0..n {
            let [lo, hi] = mc.ci[agent];
            let slack = 0.5 * (hi - lo);
            assert!(
                exact[agent] > lo - slack && exact[agent] < hi + slack,
                "{exact:?} {:?}",
                mc.ci
            );
        }
        let none = check_lemma6(&i, &factory, 0, 10, 8).unwrap();
        assert!(none.pass && none.per_agent_estimates.iter().all(|&e| e == 0.0));
    }
}

#[test]
fn combined_report_serialises() {
    let i = inst(2, 3, 0.45, 0.5);
    let r = check_lemmas(&i, 1e-12).unwrap();
    assert!(r.pass());
    let v = serde_json::to_value(&r).unwrap();
    assert!(v["lemma3"]["min_slack_a"].is_number());
    assert!(v["lemma5"]["min_value"].is_number());
    assert!(v["lemma8"]["analytic_floor"].is_number());
    assert!(check_lemma8(&inst(4, 2, 0.49, 0.9), 1e-12).unwrap().pass);
}

#[test]
fn kl_direction_and_scale() {
    let i = inst(3, 2, 0.45, 0.5);
    let pol = PolicySpec::Constant(optimal_action(i.theta()));
    let r = kl_report(&i, 0, &pol, "a_theta", 200).unwrap();
    assert!(r.pass);
    assert!(r.kl <= r.kl + r.reverse_kl && r.reverse_kl <= r.kl + r.reverse_kl);
    assert!(r.kl <= r.chi_square * (1.0 + 1e-9));
    let short = path_kl(&i, 0, &pol, 20).unwrap();
    assert!(short <= r.kl && short >= 0.0);
    let occ = n_minus_occupancy(&i, &pol, 200).unwrap();
    assert!((occ.expected_max - r.e_n_minus).abs() < 1e-15);
    assert!(occ.expected_max >= occ.max_of_expectations);
}
