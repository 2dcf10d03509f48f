use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, DynError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error("polynomial must have degree >= 2 with nonzero leading coefficient (got {0} coefficients)")]
    InvalidPolynomial(usize),

    #[error("root finder did not converge after {restarts} restarts; residuals {residuals:?}")]
    RootFinding { restarts: usize, residuals: Vec<f64> },

    #[error("indifferent cycle of period {period} (|multiplier| = {modulus}) near {point}")]
    IndifferentCycle {
        period: usize,
        modulus: f64,
        point: Complex64,
    },

    #[error("point {0} is not strictly inside the disk")]
    NotInside(Complex64),

    #[error("degenerate disk: {0}")]
    DegenerateDisk(String),

    #[error("containment violated: {0}")]
    Containment(String),

    #[error("union is disconnected ({components} pieces)")]
    Disconnected { components: usize },

    #[error("branch tracking failed on target arc {from} -> {to}: {reason}")]
    BranchTracking {
        from: Complex64,
        to: Complex64,
        reason: String,
    },

    #[error("disk boundary passes within {distance:e} of critical value {value}")]
    NearCriticalValue { value: Complex64, distance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("external ray at angle {angle} diverged; last good potential {last_potential:e}")]
    RayDivergence { angle: String, last_potential: f64 },

    #[error("external ray at angle {0} did not land")]
    RayNotLanded(String),

    #[error("puzzle construction failed: {0}")]
    Puzzle(String),

    #[error("interval root solve failed on branch {branch}: {reason}")]
    IntervalSolve { branch: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DynError {
    fn from(e: std::io::Error) -> Self {
        DynError::Io(e.to_string())
    }
}
