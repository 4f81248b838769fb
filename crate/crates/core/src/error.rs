use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance parameters: {0}")]
    InvalidParams(String),

    #[error("malformed sign array: {0}")]
    MalformedSigns(String),

    #[error("{what} out of range: {value} not in {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },

    #[error("enumeration cap exceeded: {what} needs {required}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        required: usize,
        cap: usize,
    },

    #[error("self-transition probability {0} >= 1; instance is corrupted")]
    DegenerateSelfLoop(f64),

    #[error("value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("policy does not supply an action for state {0}")]
    MissingAction(String),

    #[error("unsupported policy: {0}")]
    UnsupportedPolicy(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
