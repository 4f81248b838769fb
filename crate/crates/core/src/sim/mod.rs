//! Episode simulation, regret experiments and the lower-bound formulas.

pub mod episode;
pub mod experiment;
pub mod learner;
pub mod regret;
pub mod rng;
pub mod theory;

pub use episode::{run_episode, step, MismatchCounters, Trajectory};
pub use experiment::{avg_regret_over_theta, mean_ci, AvgRegretSummary, LearnerFactory};
pub use learner::{BaselineConfig, BaselineLearner, Learner, PolicyLearner};
pub use regret::{bellman_gap, capped_stay_counts, run_regret, write_regret_csv, RegretCurve};
pub use rng::{derive_seed, episode_rng};
pub use theory::{
    delta_star, lower_bound_from, lower_bound_value, self_consistent_delta_star, LowerBound,
};
