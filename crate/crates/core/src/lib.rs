//! Laboratory for the two-node hard instances of decentralized
//! multi-agent stochastic shortest path with linear-mixture transitions.
//!
//! The instance mathematics ([`instance`], [`features`], [`kernel`],
//! [`values`], [`properties`], [`infodiv`]) is generic over a [`Scalar`]
//! (`f32` or `f64`); the aliases at the crate root fix it to `f64`.
//! Simulation and regret experiments live in [`sim`].

pub mod error;
pub mod features;
pub mod infodiv;
pub mod instance;
pub mod kernel;
pub mod properties;
pub mod scalar;
pub mod signs;
pub mod sim;
pub mod statespace;
pub mod values;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use signs::SignMatrix;
pub use statespace::{GlobalAction, GlobalState};

/// Double-precision instance.
pub type Instance = instance::Instance<f64>;
/// Single-precision instance.
pub type Instance32 = instance::Instance<f32>;
pub type InstanceParams = instance::InstanceParams<f64>;
pub type ThetaPattern = instance::ThetaPattern<f64>;
pub type ValueTable = values::ValueTable<f64>;
pub type ValueTable32 = values::ValueTable<f32>;

pub use sim::{BaselineConfig, BaselineLearner, Learner, PolicyLearner, RegretCurve, Trajectory};
pub use values::PolicySpec;
