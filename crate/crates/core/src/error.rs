use thiserror::Error;

use crate::domain::Subsystem;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing state coefficient for subsystem '{subsystem}' in subprocess '{subprocess}'")]
    MissingCoefficient { subsystem: &'static str, subprocess: &'static str },

    #[error("missing power for subsystem '{0}'")]
    MissingPower(&'static str),

    #[error("non-physical regression constants: duration {0} s is negative")]
    NonPhysicalRegression(f64),

    #[error("unknown part instance '{0}'")]
    UnknownPart(String),

    #[error("part '{part}' has no orientation {orientation}")]
    UnknownOrientation { part: String, orientation: usize },

    #[error("empty batch {0}")]
    EmptyBatch(usize),

    #[error("plan is invalid: {0}")]
    InvalidPlan(String),

    #[error("breakdowns were computed with different machine specs")]
    MachineMismatch,

    #[error("instance exceeds brute-force limits: {0}")]
    LimitsExceeded(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("solution error: {0}")]
    Solution(String),

    #[error("solver hook failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn missing_coefficient(f: Subsystem, l: crate::domain::Subprocess) -> Self {
        Error::MissingCoefficient { subsystem: f.code(), subprocess: l.code() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
