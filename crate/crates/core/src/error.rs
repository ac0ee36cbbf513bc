use thiserror::Error;

/// Errors raised by the geometry, functional and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The candidate form is not a Kähler metric (non-positive eigenvalue).
    #[error("not a Kähler metric at node {node} (x = {x:.6e}): eigenvalue {value:.6e}")]
    NotKahler { node: usize, x: f64, value: f64 },

    #[error("operation not supported on the {0} model")]
    UnsupportedModel(&'static str),

    /// An intermediate potential along a synthetic path left P(M, ω).
    #[error("path broken at s = {s}: {reason}")]
    PathBroken { s: f64, reason: String },

    #[error("solver failure: {0}")]
    Solver(String),

    /// The Ricci-positive generator did not produce a Ricci-positive metric.
    #[error("generator output not Ricci-positive (min eigenvalue {achieved_min:.6e})")]
    Generator { achieved_min: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Parameter(msg.into()))
}
