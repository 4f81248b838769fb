//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use massp_core::infodiv::kl_report;
use massp_core::instance::{build_instance, delta_max, Instance, InstanceParams};
use massp_core::kernel::{p_star, prob_closed, validate_kernel, DEFAULT_VALIDATION_SEED};
use massp_core::properties::{
    check_lemma3, check_lemma6, check_lemma8, lemma5_exhaustive, Verdict,
};
use massp_core::signs::SignMatrix;
use massp_core::sim::{
    avg_regret_over_theta, delta_star, episode_rng, lower_bound_from, run_episode, run_regret,
    self_consistent_delta_star, BaselineConfig, BaselineLearner, Learner, PolicyLearner,
};
use massp_core::statespace::{state_type, submasks, GlobalState};
use massp_core::values::{
    fully_mismatched_action, optimal_action, v1_closed_form, value_table, verify_theorem1,
    PolicySpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID_SEED: u64 = 20_240_601;
const THETAS_PER_CELL: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn grid() -> Vec<Instance<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED);
    let mut out = Vec::new();
    for n in 1..=4 {
        for d in [2, 3] {
            for delta in [0.42, 0.45, 0.49] {
                for frac in [0.25, 0.5, 0.9] {
                    let params = InstanceParams::with_fraction(n, d, delta, frac).unwrap();
                    let m = params.sign_count();
                    for _ in 0..THETAS_PER_CELL {
                        let idx = rng.random_range(0..1u64 << m);
                        let signs = SignMatrix::from_index(n, d - 1, idx);
                        out.push(build_instance(params, signs).unwrap());
                    }
                }
            }
        }
    }
    out
}

fn label(i: &Instance<f64>) -> String {
    format!(
        "n={} d={} δ={} Δ={:.3e} θ={}",
        i.n(),
        i.d(),
        i.delta(),
        i.big_delta(),
        i.theta().signs
    )
}

fn kernel_validity(g: &[Instance<f64>]) -> Outcome {
    let start = Instant::now();
    let mut worst_dev: f64 = 0.0;
    let mut bad = None;
    for i in g {
        let r = validate_kernel(i, 4, DEFAULT_VALIDATION_SEED).unwrap();
        worst_dev = worst_dev.max(r.max_simplex_dev);
        let ok = r.exhaustive
            && r.negative_count == 0
            && r.min_prob >= 0.0
            && r.max_prob <= 1.0
            && r.max_simplex_dev <= 1e-12
            && r.infeasible_nonzero_count == 0
            && r.goal_certain;
        if !ok && bad.is_none() {
            bad = Some(format!("{}: {:?}", label(i), r.failure(1e-12)));
        }
    }
    let took = start.elapsed();
    let fast = took < Duration::from_secs(60);
    Outcome {
        pass: bad.is_none() && fast,
        detail: match bad {
            Some(b) => b,
            None => format!(
                "{} instances, max simplex deviation {worst_dev:.2e}, {:.1}s",
                g.len(),
                took.as_secs_f64()
            ),
        },
    }
}

fn model_equivalence(g: &[Instance<f64>]) -> Outcome {
    let mut worst: f64 = 0.0;
    for i in g {
        let r = validate_kernel(i, 4, DEFAULT_VALIDATION_SEED).unwrap();
        worst = worst.max(r.max_model_gap);
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max |closed − inner| = {worst:.2e}"),
    }
}

fn corollary1(g: &[Instance<f64>]) -> Outcome {
    let mut worst: f64 = 0.0;
    for i in g {
        let a = optimal_action(i.theta());
        for src in GlobalState::all(i.n()).filter(|s| !s.is_goal()) {
            for m in submasks(src.mask()) {
                let dst = GlobalState::new(i.n(), m);
                let p = prob_closed(i, src, &a, dst);
                let star = p_star(i, state_type(src), state_type(dst)).unwrap();
                worst = worst.max((p - star).abs());
            }
        }
    }
    Outcome {
        pass: worst <= 1e-14,
        detail: format!("max deviation from p*(r, r') = {worst:.2e}"),
    }
}

fn theorem1(g: &[Instance<f64>]) -> Outcome {
    let mut spread: f64 = 0.0;
    let mut gap = f64::INFINITY;
    let mut argmin_fail = None;
    for i in g {
        let r = verify_theorem1(i, 1e-10).unwrap();
        spread = spread.max(r.max_spread());
        gap = gap.min(r.min_gap());
        if !r.argmin_ok && argmin_fail.is_none() {
            argmin_fail = Some(label(i));
        }
    }
    Outcome {
        pass: argmin_fail.is_none() && spread <= 1e-10 && gap > 1e-9,
        detail: match argmin_fail {
            Some(l) => format!("a_θ outside the Q-argmin (or tie at an s-agent) on {l}"),
            None => format!("max spread {spread:.2e}, min gap {gap:.4}"),
        },
    }
}

fn v1_anchor(g: &[Instance<f64>]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut min_slack_multi = f64::INFINITY;
    let mut min_slack_single = f64::INFINITY;
    for i in g {
        let t = value_table(i).unwrap();
        worst = worst.max((t.v1() - v1_closed_form(i.params())).abs());
        let slack = t.diameter_slack();
        if i.n() == 1 {
            min_slack_single = min_slack_single.min(slack);
        } else {
            min_slack_multi = min_slack_multi.min(slack);
        }
    }
    // With one agent V*_1 is B* itself, so the slack is exactly zero there.
    Outcome {
        pass: worst <= 1e-12 && min_slack_multi > 0.0 && min_slack_single >= 0.0,
        detail: format!(
            "max |recursion − closed form| = {worst:.2e}, min V*_1 − B*/n = {min_slack_multi:.4} (n ≥ 2), {min_slack_single:.1e} (n = 1)"
        ),
    }
}

fn lemma3(g: &[Instance<f64>]) -> Outcome {
    let mut min_slack = f64::INFINITY;
    let mut verdict = Verdict::Vacuous;
    for i in g.iter().filter(|i| i.n() >= 2) {
        let r = check_lemma3(i).unwrap();
        verdict = verdict.and(r.verdict);
        for s in [r.min_slack_a, r.min_slack_b].into_iter().flatten() {
            min_slack = min_slack.min(s);
        }
    }
    Outcome {
        pass: verdict == Verdict::Pass,
        detail: format!("verdict {verdict:?}, min slack {min_slack:.3e}"),
    }
}

fn lemma5(g: &[Instance<f64>]) -> Outcome {
    let mut min = f64::INFINITY;
    for i in g {
        min = min.min(lemma5_exhaustive(i, 1e-12).unwrap().min_value);
    }
    Outcome {
        pass: min >= -1e-12,
        detail: format!("min value-weighted difference {min:.3e}"),
    }
}

fn lemma8(g: &[Instance<f64>]) -> Outcome {
    let mut min_stay = f64::INFINITY;
    let mut worst_floor_gap = f64::INFINITY;
    for i in g {
        let r = check_lemma8(i, 1e-12).unwrap();
        min_stay = min_stay.min(r.min_stay);
        worst_floor_gap = worst_floor_gap.min(r.min_stay - r.analytic_floor);
    }
    Outcome {
        pass: min_stay > 0.5 && worst_floor_gap >= -1e-12,
        detail: format!("min stay {min_stay:.6}, min (stay − floor) {worst_floor_gap:.2e}"),
    }
}

fn lemma7(g: &[Instance<f64>]) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED ^ 7);
    let mut checked = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut bad = None;
    for i in g.iter().filter(|i| i.n() <= 2) {
        let mut policies = vec![
            ("a_theta", PolicySpec::Constant(optimal_action(i.theta()))),
            (
                "mismatched",
                PolicySpec::Constant(fully_mismatched_action(i.theta())),
            ),
        ];
        for k in 0..3 {
            let tag = ["table-0", "table-1", "table-2"][k];
            policies.push((tag, PolicySpec::random_table(i.n(), i.width(), &mut rng)));
        }
        for horizon in [20, 100] {
            for j in 0..i.width() {
                for (tag, pol) in &policies {
                    let r = kl_report(i, j, pol, tag, horizon).unwrap();
                    checked += 1;
                    worst_ratio = worst_ratio.max(r.kl / r.bound);
                    if !r.pass && bad.is_none() {
                        bad = Some(format!(
                            "{} j={j} T={horizon} {tag}: {} > {}",
                            label(i),
                            r.kl,
                            r.bound
                        ));
                    }
                }
            }
        }
    }
    let took = start.elapsed();
    Outcome {
        pass: bad.is_none() && took < Duration::from_secs(120),
        detail: bad.unwrap_or(format!(
            "{checked} (instance, j, T, policy) cases, max kl/bound {worst_ratio:.4}, {:.1}s",
            took.as_secs_f64()
        )),
    }
}

fn lemma6() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for n in [1, 2] {
        let params = InstanceParams::with_fraction(n, 2, 0.45, 0.5).unwrap();
        let inst = build_instance(params, SignMatrix::filled(n, 1, 1)).unwrap();
        for (tag, action) in [
            ("a_theta", optimal_action(inst.theta())),
            ("mismatched", fully_mismatched_action(inst.theta())),
        ] {
            let factory = |_: &Instance<f64>| -> Box<dyn Learner> {
                Box::new(PolicyLearner::new(
                    PolicySpec::Constant(action.clone()),
                    tag,
                ))
            };
            let r = check_lemma6(&inst, &factory, 100, 2000, 6).unwrap();
            pass &= r.pass;
            let lo = r.ci.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
            lines.push(format!(
                "n={n} {tag}: min lower CI {lo:.1} vs {:.1}",
                r.threshold
            ));
        }
    }
    Outcome {
        pass,
        detail: lines.join("; "),
    }
}

fn fidelity() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for n in [1, 2] {
        let params = InstanceParams::with_fraction(n, 2, 0.45, 0.5).unwrap();
        let inst = build_instance(params, SignMatrix::filled(n, 1, 1)).unwrap();
        let v_n = value_table(&inst).unwrap().b_star;
        let mut actor = PolicyLearner::new(
            PolicySpec::Constant(optimal_action(inst.theta())),
            "a_theta",
        );
        let episodes = 10_000;
        let lengths: Vec<f64> = (0..episodes)
            .map(|k| {
                let mut rng = episode_rng(11, 0, k);
                run_episode(&inst, &mut actor, &mut rng, params.h_max, None).cost
            })
            .collect();
        let (mean, half) = massp_core::sim::mean_ci(&lengths);
        let se = half / 1.96;
        let z = (mean - v_n).abs() / se;
        pass &= z <= 3.0;
        lines.push(format!(
            "n={n}: mean {mean:.4} vs V*_n {v_n:.4} ({z:.2} se)"
        ));

        let csv = |seed| {
            let mut l = BaselineLearner::new(&params, BaselineConfig::default());
            let curve = run_regret(&inst, &mut l, 200, seed, 0).unwrap();
            let mut buf = Vec::new();
            curve.write_csv(&mut buf).unwrap();
            buf
        };
        let same = csv(3) == csv(3);
        pass &= same;
        lines.push(format!("n={n}: repeated-seed CSV identical = {same}"));
    }
    Outcome {
        pass,
        detail: lines.join("; "),
    }
}

fn theorem2_average() -> Outcome {
    let start = Instant::now();
    let (n, d, delta, k) = (1, 2, 0.45, 1000);
    let big = self_consistent_delta_star(n, d, delta, k);
    let nominal = delta_star(n, d, delta, k, 1.0 / 0.46);
    let params = InstanceParams::new(n, d, delta, big);
    let below_max = big < delta_max(n, delta).unwrap();
    let factory = |i: &Instance<f64>| -> Box<dyn Learner> {
        Box::new(BaselineLearner::new(i.params(), BaselineConfig::default()))
    };
    let s = avg_regret_over_theta(&params, &factory, k, 200, 12, true).unwrap();
    let check = lower_bound_from(&params, s.per_theta[0].b_star, k);
    let took = start.elapsed();
    Outcome {
        pass: s.pass && below_max && check.valid && took < Duration::from_secs(600),
        detail: format!(
            "Δ*={big:.4e} (nominal {nominal:.4e}), avg regret {:.4} ± {:.4} (realized {:.3} ± {:.3}) vs bound {:.4}, K threshold {:.3}, truncations {}, {:.1}s",
            s.avg_regret,
            s.ci_halfwidth,
            s.realized_avg_regret,
            s.realized_ci_halfwidth,
            s.lower_bound,
            s.k_threshold,
            s.truncations,
            took.as_secs_f64()
        ),
    }
}

fn main() -> ExitCode {
    let g = grid();

    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("1 kernel validity", Box::new(|| kernel_validity(&g))),
        ("2 model equivalence", Box::new(|| model_equivalence(&g))),
        ("3 corollary 1 uniform p*", Box::new(|| corollary1(&g))),
        ("4 theorem 1 optimal structure", Box::new(|| theorem1(&g))),
        (
            "5 V*_1 closed form and diameter",
            Box::new(|| v1_anchor(&g)),
        ),
        ("6 lemma 3 binomial inequalities", Box::new(|| lemma3(&g))),
        (
            "7 lemma 5 value-weighted difference",
            Box::new(|| lemma5(&g)),
        ),
        ("8 lemma 8 stay probability", Box::new(|| lemma8(&g))),
        ("9 lemma 7 KL bound", Box::new(|| lemma7(&g))),
        ("10 lemma 6 truncated visits", Box::new(lemma6)),
        ("11 simulation fidelity", Box::new(fidelity)),
        (
            "12 averaged regret vs lower bound",
            Box::new(theorem2_average),
        ),
    ];
    let mut failures = 0;
    for (name, run) in &criteria {
        let o = run();
        if !o.pass {
            failures += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
