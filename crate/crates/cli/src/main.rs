//! `massp`: build hard instances, verify their properties and run regret
//! experiments.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.

mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use massp_core::instance::{
    build_instance, delta_max, validate_params, InstanceFile, DEFAULT_DELTA,
};
use massp_core::sim::{
    avg_regret_over_theta, lower_bound_value, mean_ci, run_regret, self_consistent_delta_star,
    write_regret_csv, BaselineConfig, BaselineLearner, Learner, PolicyLearner,
};
use massp_core::values::{fully_mismatched_action, optimal_action, value_table, PolicySpec};
use massp_core::{Instance, InstanceParams, SignMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "massp",
    version,
    about = "Two-node multi-agent SSP hard-instance laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance JSON file.
    Gen(GenArgs),
    /// Run the property checkers on an instance.
    Verify(verify::VerifyArgs),
    /// Print the optimal value table.
    Values {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regret curve of one learner on one instance.
    Regret(RegretArgs),
    /// Regret averaged over every sign pattern at Δ = Δ*.
    Avg(AvgArgs),
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Parameter gap; defaults to half of Δ_max.
    #[arg(long = "Delta")]
    big_delta: Option<f64>,
    /// Rows separated by ';', entries by ',', e.g. "+1,-1;-1,+1".
    #[arg(long, allow_hyphen_values = true)]
    signs: Option<String>,
    /// Seed for random signs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    h_max: Option<usize>,
    /// Output path; JSON goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LearnerKind {
    /// Least-squares sign learner with ε-greedy exploration.
    Baseline,
    /// Sign-matching action of the true θ (an oracle).
    Optimal,
    /// Every component against θ.
    Mismatched,
}

#[derive(clap::Args)]
struct LearnerArgs {
    #[arg(long, value_enum, default_value = "baseline")]
    learner: LearnerKind,
    /// Baseline exploration rate.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Baseline ridge regulariser.
    #[arg(long, default_value_t = 1.0)]
    ridge: f64,
}

impl LearnerArgs {
    fn config(&self) -> BaselineConfig {
        BaselineConfig {
            epsilon: self.epsilon,
            ridge: self.ridge,
            ..BaselineConfig::default()
        }
    }

    fn make(&self, inst: &Instance) -> Box<dyn Learner> {
        match self.learner {
            LearnerKind::Baseline => Box::new(BaselineLearner::new(inst.params(), self.config())),
            LearnerKind::Optimal => Box::new(PolicyLearner::new(
                PolicySpec::Constant(optimal_action(inst.theta())),
                "oracle-optimal",
            )),
            LearnerKind::Mismatched => Box::new(PolicyLearner::new(
                PolicySpec::Constant(fully_mismatched_action(inst.theta())),
                "fully-mismatched",
            )),
        }
    }

    /// Learners that do not read θ.
    fn is_algorithm(&self) -> bool {
        matches!(self.learner, LearnerKind::Baseline)
    }
}

#[derive(clap::Args)]
struct RegretArgs {
    instance: PathBuf,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long = "K", alias = "k", default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-episode CSV, averaged over trials.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AvgArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long = "K", alias = "k", default_value_t = 1000)]
    k: usize,
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A command's outcome: passed, or failed with the listed items.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Verify(a) => verify::cmd_verify(a),
        Command::Values { instance, out } => cmd_values(&instance, out.as_deref()),
        Command::Regret(a) => cmd_regret(a),
        Command::Avg(a) => cmd_avg(a),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn parse_signs(text: &str, n: usize, width: usize) -> Result<SignMatrix> {
    let rows: Vec<Vec<i64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<i64>()
                        .with_context(|| format!("bad sign {x:?}"))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.len() != n {
        bail!("{} sign rows for {n} agents", rows.len());
    }
    Ok(SignMatrix::from_rows(&rows, width)?)
}

fn random_signs(n: usize, width: usize, seed: u64) -> SignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = SignMatrix::filled(n, width, 1);
    for i in 0..n {
        for p in 0..width {
            if rng.random::<bool>() {
                s.set(i, p, -1);
            }
        }
    }
    s
}

pub(crate) fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn load_instance(path: &Path) -> Result<(InstanceFile, Instance)> {
    let file = InstanceFile::read(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = file.build_unchecked()?;
    Ok((file, inst))
}

fn load_valid_instance(path: &Path) -> Result<(InstanceFile, Instance)> {
    let (file, inst) = load_instance(path)?;
    let report = inst.validation();
    if !report.is_valid() {
        bail!("invalid instance {}:\n{report}", path.display());
    }
    Ok((file, inst))
}

fn cmd_gen(a: GenArgs) -> Result<Outcome> {
    let mut params = InstanceParams::new(a.n, a.d, a.delta, a.big_delta.unwrap_or(0.0));
    if a.big_delta.is_none() {
        params.big_delta = match delta_max(a.n, a.delta) {
            Ok(m) => 0.5 * m,
            Err(_) => f64::NAN,
        };
    }
    if let Some(h) = a.h_max {
        params.h_max = h;
    }
    let mut report = validate_params(&params);
    if a.big_delta.is_none() {
        // A defaulted Δ is only undefined because δ is already reported.
        report.violations.retain(|v| v.constraint != "Delta");
    }
    if !report.is_valid() {
        bail!("invalid parameters:\n{report}");
    }
    let signs = match &a.signs {
        Some(t) => parse_signs(t, a.n, params.width())?,
        None => random_signs(a.n, params.width(), a.seed),
    };
    let inst = build_instance(params, signs)?;
    let file = inst.to_file();
    match &a.out {
        Some(path) => {
            file.write(path)
                .with_context(|| format!("writing {}", path.display()))?;
            println!(
                "wrote {}: n={} d={} δ={} Δ={:.6e} θ signs {}",
                path.display(),
                file.n,
                file.d,
                file.delta,
                file.big_delta,
                inst.theta().signs
            );
        }
        None => println!("{}", file.to_json()?),
    }
    Ok(Outcome::Pass)
}

fn cmd_values(path: &Path, out: Option<&Path>) -> Result<Outcome> {
    let (_, inst) = load_valid_instance(path)?;
    let table = value_table(&inst)?;
    let increasing = table.strictly_increasing();
    let rendered: Vec<String> = table.v.iter().map(|x| format!("{x:.6}")).collect();
    println!("v = [{}]", rendered.join(", "));
    println!("B* = {:.6}", table.b_star);
    if !increasing {
        println!("FAIL values: not strictly increasing in the type");
    }
    if let Some(p) = out {
        write_json(
            p,
            &json!({ "v": table.v, "b_star": table.b_star, "strictly_increasing": increasing }),
        )?;
    }
    Ok(if increasing {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn cmd_regret(a: RegretArgs) -> Result<Outcome> {
    let (file, inst) = load_valid_instance(&a.instance)?;
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let k = a.k;
    let mut cost = vec![0.0; k];
    let mut regret = vec![0.0; k];
    let mut truncated = vec![false; k];
    let mut finals = Vec::with_capacity(a.trials);
    let mut gaps = Vec::with_capacity(a.trials);
    let mut truncations = 0;
    let mut tag = String::new();
    let mut centralized = true;
    let mut v_init = 0.0;
    for t in 0..a.trials {
        let mut learner = a.learner.make(&inst);
        let curve = run_regret(&inst, learner.as_mut(), k, a.seed, t as u64)?;
        let w = 1.0 / a.trials as f64;
        for e in 0..k {
            cost[e] += w * curve.per_episode_cost[e];
            regret[e] += w * curve.cumulative_regret[e];
            truncated[e] |= curve.truncated[e];
        }
        finals.push(curve.final_regret());
        gaps.push(curve.total_gap());
        truncations += curve.truncation_count;
        tag = curve.learner.clone();
        centralized = curve.centralized;
        v_init = curve.v_init;
    }
    if let Some(p) = &a.csv {
        let f = fs::File::create(p).with_context(|| format!("writing {}", p.display()))?;
        write_regret_csv(f, &cost, &regret, &truncated)?;
    }
    let lb = lower_bound_value(&inst, k)?;
    let (realized, realized_ci) = mean_ci(&finals);
    let (expected, expected_ci) = mean_ci(&gaps);
    let drift = if k > 0 { realized / k as f64 } else { 0.0 };
    println!(
        "learner {tag}{}: K={k} trials={} V*(s_init)={v_init:.6}",
        if centralized { " (centralized)" } else { "" },
        a.trials
    );
    println!("realized regret {realized:.4} ± {realized_ci:.4} (drift {drift:.5}/episode)");
    println!("expected regret (Bellman-gap) {expected:.4} ± {expected_ci:.4}");
    println!(
        "lower bound {:.4} (K threshold {:.3}, {})",
        lb.bound,
        lb.k_threshold,
        if lb.valid {
            "applies"
        } else {
            "does not apply"
        }
    );
    if truncations > 0 {
        println!(
            "WARNING: {truncations} truncated episodes; this run is not usable for acceptance"
        );
    }
    if let Some(p) = &a.out {
        write_json(
            p,
            &json!({
                "params": file,
                "theta_signs": file.signs,
                "K": k,
                "trials": a.trials,
                "seed": a.seed,
                "learner": tag,
                "centralized": centralized,
                "v_init": v_init,
                "avg_regret": realized,
                "ci": [realized - realized_ci, realized + realized_ci],
                "expected_regret": expected,
                "expected_regret_ci": [expected - expected_ci, expected + expected_ci],
                "lower_bound": lb.bound,
                "k_threshold": lb.k_threshold,
                "truncations": truncations,
            }),
        )?;
    }
    Ok(Outcome::Pass)
}

fn cmd_avg(a: AvgArgs) -> Result<Outcome> {
    let m = a.n * a.d.saturating_sub(1);
    if m > massp_core::sim::experiment::MAX_THETA_BITS {
        bail!(
            "n·(d−1) = {m} exceeds the cap of {} (|Θ| ≤ 16)",
            massp_core::sim::experiment::MAX_THETA_BITS
        );
    }
    let dm = delta_max(a.n, a.delta)?;
    let big = self_consistent_delta_star(a.n, a.d, a.delta, a.k);
    let params = InstanceParams::new(a.n, a.d, a.delta, big);
    let report = validate_params(&params);
    if !report.is_valid() || big >= dm {
        bail!("Δ* = {big:e} is not admissible:\n{report}");
    }
    let learner = &a.learner;
    let factory = |inst: &Instance| learner.make(inst);
    let s = avg_regret_over_theta(
        &params,
        &factory,
        a.k,
        a.trials,
        a.seed,
        learner.is_algorithm(),
    )?;
    println!(
        "n={} d={} δ={} K={} Δ*={big:.6e} over {} sign patterns, {} trials each",
        a.n,
        a.d,
        a.delta,
        a.k,
        s.per_theta.len(),
        a.trials
    );
    println!(
        "Θ-averaged regret {:.4} ± {:.4} (realized {:.4} ± {:.4})",
        s.avg_regret, s.ci_halfwidth, s.realized_avg_regret, s.realized_ci_halfwidth
    );
    println!(
        "lower bound {:.4}, K threshold {:.3}",
        s.lower_bound, s.k_threshold
    );
    println!("{}", s.verdict());
    if let Some(p) = &a.out {
        write_json(p, &serde_json::to_value(&s)?)?;
    }
    Ok(if !s.applicable || s.pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_parsing() {
        let s = parse_signs("+1,-1; -1,1", 2, 2).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1, -1], vec![-1, 1]]);
        assert!(parse_signs("1,1", 2, 2).is_err());
        assert!(parse_signs("1,0", 1, 2).is_err());
        assert!(parse_signs("1,x", 1, 2).is_err());
    }

    #[test]
    fn random_signs_are_seeded() {
        assert_eq!(random_signs(3, 2, 9), random_signs(3, 2, 9));
    }
}
