//! `massp verify`: runs the selected checkers and reports each section.

use std::path::PathBuf;

use anyhow::Result;
use clap::ValueEnum;
use massp_core::infodiv::kl_report;
use massp_core::kernel::{p_star, prob_closed, validate_kernel, DEFAULT_VALIDATION_SEED};
use massp_core::properties::{check_lemma3, check_lemma8, lemma5_exhaustive, Verdict};
use massp_core::statespace::{state_type, submasks};
use massp_core::values::{
    fully_mismatched_action, optimal_action, value_table, verify_theorem1, PolicySpec,
    DEFAULT_THEOREM_TOL,
};
use massp_core::{Error, GlobalState, Instance};
use serde_json::{json, Value};

use crate::{load_instance, write_json, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Section {
    Kernel,
    Corollary1,
    Lemma3,
    Lemma5,
    Lemma8,
    Theorem1,
    V1Bound,
    Lemma7,
}

const DEFAULT_SUITE: [Section; 7] = [
    Section::Kernel,
    Section::Corollary1,
    Section::Lemma3,
    Section::Lemma5,
    Section::Lemma8,
    Section::Theorem1,
    Section::V1Bound,
];

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Kernel => "kernel",
            Section::Corollary1 => "corollary1",
            Section::Lemma3 => "lemma3",
            Section::Lemma5 => "lemma5",
            Section::Lemma8 => "lemma8",
            Section::Theorem1 => "theorem1",
            Section::V1Bound => "v1-bound",
            Section::Lemma7 => "lemma7",
        }
    }
}

#[derive(clap::Args)]
pub struct VerifyArgs {
    instance: PathBuf,
    /// Sections to run (comma separated); all but lemma7 by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    suite: Vec<Section>,
    /// Probability tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Tolerance of the value-iteration based optimality check.
    #[arg(long, default_value_t = DEFAULT_THEOREM_TOL)]
    theorem_tol: f64,
    /// Also check the path KL bound.
    #[arg(long)]
    kl: bool,
    /// Path length for the KL check.
    #[arg(long = "kl-T", alias = "kl-t", default_value_t = 100)]
    kl_t: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Vacuous,
    Skipped,
}

struct SectionResult {
    status: Status,
    detail: String,
    report: Value,
}

impl SectionResult {
    fn new(pass: bool, detail: String, report: Value) -> Self {
        Self {
            status: if pass { Status::Pass } else { Status::Fail },
            detail,
            report,
        }
    }
}

fn run(section: Section, inst: &Instance, args: &VerifyArgs) -> massp_core::Result<SectionResult> {
    let tol = args.tol;
    Ok(match section {
        Section::Kernel => {
            let r = validate_kernel(inst, 4, DEFAULT_VALIDATION_SEED)?;
            let detail = r.failure(tol).unwrap_or_else(|| {
                format!(
                    "{} triples ({}), simplex deviation {:.2e}, model gap {:.2e}",
                    r.checked_triples,
                    if r.exhaustive {
                        "exhaustive"
                    } else {
                        "sampled"
                    },
                    r.max_simplex_dev,
                    r.max_model_gap
                )
            });
            SectionResult::new(r.passes(tol), detail, json!(r))
        }
        Section::Corollary1 => {
            let a = optimal_action(inst.theta());
            let n = inst.n();
            let mut worst: f64 = 0.0;
            for src in GlobalState::all(n).filter(|s| !s.is_goal()) {
                for m in submasks(src.mask()) {
                    let dst = GlobalState::new(n, m);
                    let p = prob_closed(inst, src, &a, dst);
                    worst = worst.max((p - p_star(inst, state_type(src), state_type(dst))?).abs());
                }
            }
            SectionResult::new(
                worst <= tol,
                format!("max deviation from p*(r, r') {worst:.2e}"),
                json!({ "max_deviation": worst }),
            )
        }
        Section::Lemma3 => {
            let r = check_lemma3(inst)?;
            let detail = match r.verdict {
                Verdict::Vacuous => "vacuous (n = 1)".to_string(),
                v => format!(
                    "{v:?}, min slack a {:?}, b {:?}",
                    r.min_slack_a, r.min_slack_b
                ),
            };
            SectionResult {
                status: match r.verdict {
                    Verdict::Pass => Status::Pass,
                    Verdict::Vacuous => Status::Vacuous,
                    _ => Status::Fail,
                },
                detail,
                report: json!({ "min_slack_a": r.min_slack_a, "min_slack_b": r.min_slack_b, "verdict": r.verdict }),
            }
        }
        Section::Lemma5 => {
            let r = lemma5_exhaustive(inst, tol)?;
            SectionResult::new(
                r.pass,
                format!(
                    "min {:.3e} at state {} action {}",
                    r.min_value, r.argmin_state, r.argmin_action
                ),
                json!(r),
            )
        }
        Section::Lemma8 => {
            let r = check_lemma8(inst, tol)?;
            SectionResult::new(
                r.pass,
                format!(
                    "min stay {:.6}, analytic floor {:.6}",
                    r.min_stay, r.analytic_floor
                ),
                json!(r),
            )
        }
        Section::Theorem1 => {
            let r = verify_theorem1(inst, args.theorem_tol)?;
            let pass = r.argmin_ok && r.max_spread() <= args.theorem_tol && r.min_gap() > 0.0;
            let detail = if !r.argmin_ok {
                let bad: Vec<&str> = r
                    .per_state
                    .iter()
                    .filter(|s| s.a_theta_excess > args.theorem_tol || s.source_agent_tie)
                    .map(|s| s.state.as_str())
                    .collect();
                format!("a_θ not the unique s-agent minimiser at {}", bad.join(", "))
            } else {
                format!(
                    "max spread {:.2e}, min gap {:.4}",
                    r.max_spread(),
                    r.min_gap()
                )
            };
            SectionResult::new(
                pass,
                detail,
                json!({
                    "argmin_ok": r.argmin_ok,
                    "value_spread_per_type": r.value_spread_per_type,
                    "gaps": r.gaps,
                    "v_table": r.v_table,
                    "b_star": r.b_star,
                }),
            )
        }
        Section::V1Bound => {
            let t = value_table(inst)?;
            let slack = t.diameter_slack();
            SectionResult::new(
                slack >= 0.0,
                format!("V*_1 − B*/n = {slack:.6}"),
                json!({ "v1": t.v1(), "b_star": t.b_star, "slack": slack }),
            )
        }
        Section::Lemma7 => {
            let policies = [
                (
                    "a_theta",
                    PolicySpec::Constant(optimal_action(inst.theta())),
                ),
                (
                    "mismatched",
                    PolicySpec::Constant(fully_mismatched_action(inst.theta())),
                ),
            ];
            let mut reports = Vec::new();
            let mut worst: f64 = 0.0;
            for j in 0..inst.width() {
                for (tag, pol) in &policies {
                    let r = kl_report(inst, j, pol, tag, args.kl_t)?;
                    worst = worst.max(r.kl / r.bound);
                    reports.push(r);
                }
            }
            let pass = reports.iter().all(|r| r.pass);
            SectionResult::new(
                pass,
                format!(
                    "{} cases at T = {}, max kl/bound {worst:.4}",
                    reports.len(),
                    args.kl_t
                ),
                json!(reports),
            )
        }
    })
}

pub fn cmd_verify(args: VerifyArgs) -> Result<Outcome> {
    let (file, inst) = load_instance(&args.instance)?;
    let validation = inst.validation();
    if !validation.is_valid() {
        println!("warning: parameters violate the instance constraints:\n{validation}");
    }
    let mut suite = if args.suite.is_empty() {
        DEFAULT_SUITE.to_vec()
    } else {
        args.suite.clone()
    };
    if args.kl && !suite.contains(&Section::Lemma7) {
        suite.push(Section::Lemma7);
    }

    let mut sections = serde_json::Map::new();
    let mut failed = Vec::new();
    for s in suite {
        let res = match run(s, &inst, &args) {
            Ok(r) => r,
            Err(e @ Error::CapExceeded { .. }) => SectionResult {
                status: Status::Skipped,
                detail: e.to_string(),
                report: Value::Null,
            },
            Err(e) => SectionResult::new(false, e.to_string(), Value::Null),
        };
        let label = match res.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Vacuous => "PASS",
            Status::Skipped => "SKIP",
        };
        println!("{label} {}: {}", s.name(), res.detail);
        if res.status == Status::Fail {
            failed.push(s.name());
        }
        sections.insert(
            s.name().to_string(),
            json!({
                "status": match res.status {
                    Status::Pass => "pass",
                    Status::Fail => "fail",
                    Status::Vacuous => "vacuous",
                    Status::Skipped => "skipped",
                },
                "detail": res.detail,
                "report": res.report,
            }),
        );
    }
    let pass = failed.is_empty();
    if pass {
        println!("all selected checks passed");
    } else {
        println!("failed: {}", failed.join(", "));
    }
    if let Some(p) = &args.out {
        write_json(
            p,
            &json!({
                "instance": file,
                "valid_params": validation.is_valid(),
                "tol": args.tol,
                "sections": sections,
                "pass": pass,
            }),
        )?;
    }
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}
