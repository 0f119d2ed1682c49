//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A state violates the constraint manifold beyond tolerance.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Degenerate input that admits no well-defined answer (zero vector, Ω = 0, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Bad configuration: unknown identifiers, inconsistent dimensions, empty grids.
    #[error("configuration error: {0}")]
    Config(String),

    /// Implicit solve failed to converge.
    #[error("step failure at step {step}: residual {residual:.3e} after {iterations} iterations")]
    StepFailure {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    /// Root bracketing interval does not contain the sought transition.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// Too few parameters for the requested transversality test.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Least-squares fit or exponent estimate is degenerate.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Polynomial degree beyond the configured cap.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Homological equation hit a resonant denominator.
    #[error("small divisor: smallest denominator {0:.3e} below threshold")]
    SmallDivisor(f64),

    /// Case deliberately rejected (subcritical geometry).
    #[error("unsupported case: {0}")]
    Unsupported(String),

    /// Value lies on the wrong stratum for the requested operation.
    #[error("stratum error: {0}")]
    Stratum(String),

    /// Generic numerical failure (quadrature non-convergence, complex roots, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Branch tracking around a loop became ambiguous.
    #[error("continuation error: {0}")]
    Continuation(String),

    /// Input data is not usable (non-finite samples, too short).
    #[error("data error: {0}")]
    Data(String),

    /// Matrix fails a required structural property (e.g. infinitesimally symplectic).
    #[error("structural error: {0}")]
    Structure(String),
}
