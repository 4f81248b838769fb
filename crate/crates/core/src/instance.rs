//! Hard-instance parameters, the sign-pattern parameter space and the
//! JSON instance document.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signs::SignMatrix;

/// Default per-agent stay bias.
pub const DEFAULT_DELTA: f64 = 0.45;

/// Default cap on `n·(d−1)` for enumerating the parameter space.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// `(n, d, δ, Δ)` plus the simulation horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InstanceParams<T> {
    /// Number of agents.
    pub n: usize,
    /// Per-agent feature dimension; actions have `d − 1` components.
    pub d: usize,
    pub delta: T,
    /// Parameter gap `Δ`.
    #[serde(rename = "Delta")]
    pub big_delta: T,
    /// Episode truncation horizon (simulation only).
    pub h_max: usize,
}

impl<T: Scalar> InstanceParams<T> {
    /// Parameters with `h_max` at its default.
    pub fn new(n: usize, d: usize, delta: T, big_delta: T) -> Self {
        Self {
            n,
            d,
            delta,
            big_delta,
            h_max: default_h_max(n, delta),
        }
    }

    /// Parameters with `Δ = frac · delta_max(n, δ)`.
    pub fn with_fraction(n: usize, d: usize, delta: T, frac: T) -> Result<Self> {
        let dm = delta_max(n, delta)?;
        Ok(Self::new(n, d, delta, frac * dm))
    }

    /// Number of action components per agent.
    pub fn width(&self) -> usize {
        self.d.saturating_sub(1)
    }

    /// Total number of signed components, `n·(d−1)`.
    pub fn sign_count(&self) -> usize {
        self.n * self.width()
    }

    /// Shared magnitude `Δ / (n(d−1))` of every parameter component.
    pub fn magnitude(&self) -> T {
        self.big_delta / T::from_usize_lossy(self.sign_count().max(1))
    }

    pub fn cast<U: Scalar>(&self) -> InstanceParams<U> {
        InstanceParams {
            n: self.n,
            d: self.d,
            delta: U::lit(self.delta.to_f64_lossy()),
            big_delta: U::lit(self.big_delta.to_f64_lossy()),
            h_max: self.h_max,
        }
    }
}

/// `ceil(50·n/δ)`.
pub fn default_h_max<T: Scalar>(n: usize, delta: T) -> usize {
    let v = (T::lit(50.0) * T::from_usize_lossy(n) / delta).ceil();
    v.to_usize().unwrap_or(usize::MAX).max(1)
}

/// Upper limit on `Δ`: `2^{−n}·(1 − 2δ)/(1 + n + n²)`.
pub fn delta_max<T: Scalar>(n: usize, delta: T) -> Result<T> {
    if !delta_in_range(delta) {
        return Err(Error::OutOfRange {
            what: "delta",
            value: delta.to_string(),
            range: "(2/5, 1/2)".into(),
        });
    }
    if n == 0 {
        return Err(Error::OutOfRange {
            what: "n",
            value: "0".into(),
            range: "[1, ∞)".into(),
        });
    }
    Ok(delta_bound_unchecked(n, delta))
}

fn delta_bound_unchecked<T: Scalar>(n: usize, delta: T) -> T {
    let nf = T::from_usize_lossy(n);
    (T::one() - T::lit(2.0) * delta) / (T::one() + nf + nf * nf) / T::pow2(n)
}

fn delta_in_range<T: Scalar>(delta: T) -> bool {
    delta > T::lit(0.4) && delta < T::lit(0.5)
}

/// One violated parameter constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub value: f64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Violated constraints; empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return f.write_str("valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every parameter constraint and reports each violation.
pub fn validate_params<T: Scalar>(params: &InstanceParams<T>) -> ValidationReport {
    let mut violations = Vec::new();
    if params.n < 1 {
        violations.push(Violation {
            constraint: "n",
            value: params.n as f64,
            message: format!("n = {} < 1", params.n),
        });
    }
    if params.d < 2 {
        violations.push(Violation {
            constraint: "d",
            value: params.d as f64,
            message: format!("d = {} < 2", params.d),
        });
    }
    let delta_ok = delta_in_range(params.delta);
    if !delta_ok {
        violations.push(Violation {
            constraint: "delta",
            value: params.delta.to_f64_lossy(),
            message: format!("δ ∉ (2/5, 1/2): δ = {}", params.delta),
        });
    }
    if params.big_delta.is_nan() || params.big_delta <= T::zero() {
        violations.push(Violation {
            constraint: "Delta",
            value: params.big_delta.to_f64_lossy(),
            message: format!("Δ = {} is not positive", params.big_delta),
        });
    } else if delta_ok && params.n >= 1 {
        let dm = delta_bound_unchecked(params.n, params.delta);
        if params.big_delta >= dm {
            violations.push(Violation {
                constraint: "Delta",
                value: params.big_delta.to_f64_lossy(),
                message: format!(
                    "Δ ≥ Δ_max ≈ {:.6}: Δ = {}",
                    dm.to_f64_lossy(),
                    params.big_delta
                ),
            });
        }
    }
    if params.h_max < 1 {
        violations.push(Violation {
            constraint: "h_max",
            value: params.h_max as f64,
            message: "h_max = 0".into(),
        });
    }
    ValidationReport { violations }
}

/// The parameter vector `θ`, stored as signs plus one shared magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaPattern<T> {
    pub signs: SignMatrix,
    pub magnitude: T,
}

impl<T: Scalar> ThetaPattern<T> {
    /// `θ_{i,p}`.
    #[inline]
    pub fn component(&self, agent: usize, p: usize) -> T {
        T::from_i8(self.signs.get(agent, p)).unwrap() * self.magnitude
    }

    /// `(θ₁, 1, θ₂, 1, …, θ_n, 1)`, length `n·d`.
    pub fn padded(&self) -> Vec<T> {
        let n = self.signs.rows();
        let w = self.signs.cols();
        let mut out = Vec::with_capacity(n * (w + 1));
        for i in 0..n {
            for p in 0..w {
                out.push(self.component(i, p));
            }
            out.push(T::one());
        }
        out
    }
}

/// Negates component `j` (0-based) of every agent's block.
pub fn flip_theta<T: Scalar>(theta: &ThetaPattern<T>, j: usize) -> Result<ThetaPattern<T>> {
    if j >= theta.signs.cols() {
        return Err(Error::OutOfRange {
            what: "component index j",
            value: j.to_string(),
            range: format!("[0, {})", theta.signs.cols()),
        });
    }
    let mut signs = theta.signs.clone();
    signs.negate_column(j);
    Ok(ThetaPattern {
        signs,
        magnitude: theta.magnitude,
    })
}

/// Every sign pattern in lexicographic order (`−1 < +1`, agent 0 first).
pub fn enumerate_theta_space<T: Scalar>(
    params: &InstanceParams<T>,
    cap: usize,
) -> Result<Vec<ThetaPattern<T>>> {
    let m = params.sign_count();
    if m > cap || m > 63 {
        return Err(Error::CapExceeded {
            what: "n·(d−1) for Θ enumeration",
            required: m,
            cap,
        });
    }
    let magnitude = params.magnitude();
    Ok((0..1u64 << m)
        .map(|idx| ThetaPattern {
            signs: SignMatrix::from_index(params.n, params.width(), idx),
            magnitude,
        })
        .collect())
}

/// One hard instance. Cost is uniform: 1 per step off the goal, 0 at it.
#[derive(Clone, Debug)]
pub struct Instance<T> {
    params: InstanceParams<T>,
    theta: ThetaPattern<T>,
    padded_theta: Vec<T>,
}

/// Validates `params` and the sign array and assembles the instance.
pub fn build_instance<T: Scalar>(
    params: InstanceParams<T>,
    signs: SignMatrix,
) -> Result<Instance<T>> {
    let report = validate_params(&params);
    if !report.is_valid() {
        return Err(Error::InvalidParams(report.to_string()));
    }
    Instance::unchecked(params, signs)
}

impl<T: Scalar> Instance<T> {
    /// Skips the parameter constraints (the sign array is still checked).
    /// Used to probe corrupted instances.
    pub fn unchecked(params: InstanceParams<T>, signs: SignMatrix) -> Result<Self> {
        if params.n == 0 || params.d < 2 {
            return Err(Error::InvalidParams(format!(
                "n = {}, d = {}: need n ≥ 1 and d ≥ 2",
                params.n, params.d
            )));
        }
        if params.n > 30 {
            return Err(Error::CapExceeded {
                what: "agent count (bitmask states)",
                required: params.n,
                cap: 30,
            });
        }
        if signs.rows() != params.n || signs.cols() != params.width() {
            return Err(Error::MalformedSigns(format!(
                "sign array is {}×{}, expected {}×{}",
                signs.rows(),
                signs.cols(),
                params.n,
                params.width()
            )));
        }
        let theta = ThetaPattern {
            signs,
            magnitude: params.magnitude(),
        };
        let padded_theta = theta.padded();
        Ok(Self {
            params,
            theta,
            padded_theta,
        })
    }

    /// Same parameters, different sign pattern.
    pub fn with_theta(&self, theta: ThetaPattern<T>) -> Result<Self> {
        Self::unchecked(self.params, theta.signs)
    }

    pub fn params(&self) -> &InstanceParams<T> {
        &self.params
    }

    pub fn theta(&self) -> &ThetaPattern<T> {
        &self.theta
    }

    pub fn padded_theta(&self) -> &[T] {
        &self.padded_theta
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn width(&self) -> usize {
        self.params.width()
    }

    pub fn delta(&self) -> T {
        self.params.delta
    }

    pub fn big_delta(&self) -> T {
        self.params.big_delta
    }

    pub fn validation(&self) -> ValidationReport {
        validate_params(&self.params)
    }

    /// Uniform cost: 1 at non-goal states, 0 at the goal.
    pub fn cost(&self, state: crate::statespace::GlobalState) -> T {
        if state.is_goal() {
            T::zero()
        } else {
            T::one()
        }
    }

    pub fn cast<U: Scalar>(&self) -> Instance<U> {
        Instance::unchecked(self.params.cast(), self.theta.signs.clone())
            .expect("casting preserves shape")
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.params.n,
            d: self.params.d,
            delta: self.params.delta.to_f64_lossy(),
            big_delta: self.params.big_delta.to_f64_lossy(),
            signs: self.theta.signs.to_rows(),
            h_max: self.params.h_max,
        }
    }
}

/// On-disk instance document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    pub signs: Vec<Vec<i64>>,
    pub h_max: usize,
}

impl InstanceFile {
    pub fn params<T: Scalar>(&self) -> InstanceParams<T> {
        InstanceParams {
            n: self.n,
            d: self.d,
            delta: T::lit(self.delta),
            big_delta: T::lit(self.big_delta),
            h_max: self.h_max,
        }
    }

    pub fn sign_matrix(&self) -> Result<SignMatrix> {
        if self.signs.len() != self.n {
            return Err(Error::MalformedSigns(format!(
                "{} sign rows for {} agents",
                self.signs.len(),
                self.n
            )));
        }
        SignMatrix::from_rows(&self.signs, self.d.saturating_sub(1))
    }

    /// Validated instance.
    pub fn build<T: Scalar>(&self) -> Result<Instance<T>> {
        build_instance(self.params(), self.sign_matrix()?)
    }

    /// Instance without the parameter constraints.
    pub fn build_unchecked<T: Scalar>(&self) -> Result<Instance<T>> {
        Instance::unchecked(self.params(), self.sign_matrix()?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}
