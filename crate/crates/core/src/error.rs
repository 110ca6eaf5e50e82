use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid cycle: {0}")]
    InvalidCycle(String),

    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),

    #[error("forms live on different grids")]
    TorusMismatch,

    #[error("invariant polynomial: {0}")]
    Polynomial(String),

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("singular gauge map at grid point {point} (pivot {pivot:e})")]
    SingularGauge { point: usize, pivot: f64 },

    #[error("connection is not flat: residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotFlat { residual: f64, tolerance: f64 },

    #[error("family endpoints are not fixed across s (deviation {0:e})")]
    EndpointsNotFixed(f64),

    #[error("support precondition violated: {0}")]
    Support(String),

    #[error("convergence study needs at least 3 levels, got {0}")]
    TooFewLevels(usize),

    #[error("scenario error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("wave number {wavenumber} on axis {axis} is at or above the Nyquist limit of {resolution} points")]
    Nyquist {
        axis: usize,
        wavenumber: i64,
        resolution: usize,
    },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
