use thiserror::Error;

/// Errors raised by the geometry, map and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate metric at {location}: {detail}")]
    DegenerateMetric { location: String, detail: String },

    #[error("point {point:?} outside chart domain {name}")]
    OutsideDomain { name: String, point: Vec<f64> },

    #[error("support margin violated: field is not constant within {required} nodes of the boundary")]
    Margin { required: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported Lagrangian: {0}")]
    UnsupportedLagrangian(String),

    #[error("inconsistent Lagrangian partials: {0}")]
    InconsistentLagrangian(String),

    #[error("finite-difference step underflow (t = {0:e})")]
    StepUnderflow(f64),

    #[error("ball of radius {radius} around {center:?} leaves the chart box")]
    BallOutsideBox { center: Vec<f64>, radius: f64 },

    #[error("checkpoint does not match configuration: {0}")]
    Checkpoint(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
