use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GexpError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("scenario lattice too large: {requested} scenarios exceeds cap {cap}")]
    LatticeTooLarge { requested: u128, cap: usize },

    #[error("time {t} outside scenario horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("drift `{drift}` violates Lipschitz constant {k} between {x} and {y}")]
    LipschitzViolation { drift: String, k: f64, x: f64, y: f64 },

    #[error("CFL violation: dt = {dt} exceeds stable limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite value in {stage} at step {step}")]
    NonFinite { stage: &'static str, step: usize },

    #[error("x = {x} lies in the boundary-contaminated zone; usable range is [{lo}, {hi}]")]
    BoundaryZone { x: f64, lo: f64, hi: f64 },

    #[error("payoff `{id}` must be nonnegative")]
    NegativePayoff { id: String },

    #[error("empty scenario list")]
    EmptyScenarios,

    #[error("unknown {what} `{id}`")]
    Unknown { what: &'static str, id: String },

    #[error("output error: {0}")]
    Output(String),
}

impl From<std::io::Error> for GexpError {
    fn from(e: std::io::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl From<csv::Error> for GexpError {
    fn from(e: csv::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl From<serde_json::Error> for GexpError {
    fn from(e: serde_json::Error) -> Self {
        Self::Output(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GexpError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> GexpError {
    GexpError::InvalidParameter { name, reason: reason.into() }
}
