use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("normalizer bracket failure: {0}")]
    Bracket(String),

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("support mismatch at action {action}: p2 is zero where p1 is positive")]
    SupportMismatch { action: usize },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("finite-difference step {h} is not below the smallest probed entry {min_entry}")]
    StepSize { h: f64, min_entry: f64 },

    #[error("conjugacy check failed at state {state}: closed form {closed_form} vs direct {direct}")]
    Conjugacy {
        state: usize,
        closed_form: f64,
        direct: f64,
    },

    #[error("missing reward table")]
    MissingReward,
}

pub type Result<T> = std::result::Result<T, Error>;
