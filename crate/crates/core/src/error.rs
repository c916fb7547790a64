use thiserror::Error;

/// Errors produced anywhere in the simulation and learning stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("relaxation did not converge: residual torque {residual:.3e} after {iterations} iterations")]
    RelaxationFailure { residual: f64, iterations: usize },

    #[error("integration error: {0}")]
    Integration(String),

    #[error("state is saturated, no domain wall present")]
    Saturated,

    #[error("domain wall reached the wire boundary at t = {time_ns:.3} ns")]
    BoundaryHit { time_ns: f64 },

    #[error("critical current bracket invalid: {0}")]
    Bracket(String),

    #[error("device {device_id} stuck: no saturation after {pulses} pulses")]
    StuckDevice { device_id: usize, pulses: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("angle undefined for a zero-length weight vector")]
    ZeroVector,

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error("degenerate feature `{0}`: constant on the training split")]
    DegenerateFeature(String),

    #[error("empty class: {0}")]
    EmptyClass(String),

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::MalformedTable(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
