//! Regret averaged over the sign space `Θ`.

use serde::Serialize;

use super::learner::Learner;
use super::regret::run_regret;
use super::theory::{lower_bound_from, LowerBound};
use crate::error::{Error, Result};
use crate::instance::{enumerate_theta_space, Instance, InstanceParams};
use crate::values::value_table;

/// Largest `n·(d−1)` accepted, i.e. `|Θ| ≤ 16`.
pub const MAX_THETA_BITS: usize = 4;

/// Builds a fresh learner for one run on the given instance.
pub type LearnerFactory<'a> = dyn Fn(&Instance<f64>) -> Box<dyn Learner> + 'a;

/// Mean of `xs` and the half-width `1.96·sd/√len` of its 95% interval.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let m = xs.len();
    if m == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, 1.96 * (var / m as f64).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaRun {
    pub theta_signs: Vec<Vec<i64>>,
    pub b_star: f64,
    /// Mean over trials of the Bellman-gap regret estimate.
    pub expected_regret: f64,
    pub expected_regret_ci: f64,
    /// Mean over trials of realized cumulative regret.
    pub realized_regret: f64,
    pub realized_regret_ci: f64,
    pub truncations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AvgRegretSummary {
    pub params: InstanceParams<f64>,
    pub theta_signs: &'static str,
    #[serde(rename = "K")]
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub learner: String,
    pub centralized: bool,
    /// Θ-averaged expected regret, estimated per trial by the Bellman-gap sum.
    pub avg_regret: f64,
    /// `[avg − h, avg + h]` with `h` the 95% half-width over trials.
    pub ci: [f64; 2],
    pub ci_halfwidth: f64,
    pub realized_avg_regret: f64,
    pub realized_ci_halfwidth: f64,
    pub lower_bound: f64,
    pub k_threshold: f64,
    pub k_valid: bool,
    pub truncations: usize,
    pub applicable: bool,
    pub common_random_numbers: bool,
    pub estimator: &'static str,
    pub pass: bool,
    pub per_theta: Vec<ThetaRun>,
}

impl AvgRegretSummary {
    pub fn verdict(&self) -> &'static str {
        if !self.applicable {
            "NOT-APPLICABLE"
        } else if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Runs `trials` independent `K`-episode runs for every `θ ∈ Θ`. Trial `t`
/// uses the same random streams for every `θ`. The bound is evaluated at the
/// `Θ`-averaged `B*`; all patterns share one `B*` because it depends on `θ`
/// only through `Δ`.
pub fn avg_regret_over_theta(
    params: &InstanceParams<f64>,
    factory: &LearnerFactory<'_>,
    k_episodes: usize,
    trials: usize,
    seed: u64,
    applicable: bool,
) -> Result<AvgRegretSummary> {
    let bits = params.sign_count();
    if bits > MAX_THETA_BITS {
        return Err(Error::CapExceeded {
            what: "n·(d−1) for Θ averaging",
            required: bits,
            cap: MAX_THETA_BITS,
        });
    }
    let thetas = enumerate_theta_space(params, MAX_THETA_BITS)?;
    let mut per_trial_gap = vec![0.0; trials];
    let mut per_trial_realized = vec![0.0; trials];
    let mut per_theta = Vec::with_capacity(thetas.len());
    let mut b_star_sum = 0.0;
    let mut tag = String::new();
    let mut centralized = true;
    for signs in thetas.iter() {
        let inst = Instance::unchecked(*params, signs.signs.clone())?;
        let b_star = value_table(&inst)?.b_star;
        b_star_sum += b_star;
        let mut gaps = Vec::with_capacity(trials);
        let mut realized = Vec::with_capacity(trials);
        let mut truncations = 0;
        for t in 0..trials {
            let mut learner = factory(&inst);
            if tag.is_empty() {
                tag = learner.tag().to_string();
                centralized = learner.centralized();
            }
            let curve = run_regret(&inst, learner.as_mut(), k_episodes, seed, t as u64)?;
            gaps.push(curve.total_gap());
            realized.push(curve.final_regret());
            truncations += curve.truncation_count;
        }
        for t in 0..trials {
            per_trial_gap[t] += gaps[t] / thetas.len() as f64;
            per_trial_realized[t] += realized[t] / thetas.len() as f64;
        }
        let (er, eci) = mean_ci(&gaps);
        let (rr, rci) = mean_ci(&realized);
        per_theta.push(ThetaRun {
            theta_signs: signs.signs.to_rows(),
            b_star,
            expected_regret: er,
            expected_regret_ci: eci,
            realized_regret: rr,
            realized_regret_ci: rci,
            truncations,
        });
    }
    let b_star = b_star_sum / thetas.len() as f64;
    let LowerBound {
        bound,
        k_threshold,
        valid,
    } = lower_bound_from(params, b_star, k_episodes);
    let (avg, half) = mean_ci(&per_trial_gap);
    let (ravg, rhalf) = mean_ci(&per_trial_realized);
    let truncations: usize = per_theta.iter().map(|r| r.truncations).sum();
    let pass = applicable && valid && truncations == 0 && avg - half >= bound;
    Ok(AvgRegretSummary {
        params: *params,
        theta_signs: "averaged",
        k: k_episodes,
        trials,
        seed,
        learner: tag,
        centralized,
        avg_regret: avg,
        ci: [avg - half, avg + half],
        ci_halfwidth: half,
        realized_avg_regret: ravg,
        realized_ci_halfwidth: rhalf,
        lower_bound: bound,
        k_threshold,
        k_valid: valid,
        truncations,
        applicable,
        common_random_numbers: true,
        estimator: "bellman-gap",
        pass,
        per_theta,
    })
}
