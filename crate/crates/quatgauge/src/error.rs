//! Error types shared across the library.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix shapes are incompatible for the requested operation.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A matrix expected to be Hermitian is not, within tolerance.
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },
    /// A matrix expected to be positive definite has a non-positive eigenvalue.
    #[error("matrix is not positive definite (smallest eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { eigenvalue: f64 },
    /// A 2x2 block does not match the quaternionic embedding pattern.
    #[error("block does not match the quaternionic pattern (residual {residual:e})")]
    NotQuaternionic { residual: f64 },
    /// A chart precondition was violated.
    #[error("chart condition violated: {0}")]
    Chart(String),
    /// An index is out of range.
    #[error("index out of range: {0}")]
    Index(String),
    /// The finite-difference step is too small to be meaningful.
    #[error("finite-difference step underflow: {0:e}")]
    StepUnderflow(f64),
    /// A gauge map value is not invertible.
    #[error("gauge map is singular at the evaluation point")]
    SingularGauge,
    /// A linear solve met a numerically singular system.
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    /// Parallel transport could not proceed.
    #[error("transport integration failed: {0}")]
    Integration(String),
    /// The transport distribution is not flat enough for a consistent gauge.
    #[error("distribution not flat: loop holonomy {holonomy:e} exceeds {limit:e}")]
    Flatness { holonomy: f64, limit: f64 },
    /// A point lies outside the cell on which an analytic gauge is defined.
    #[error("point outside the analytic-gauge cell: {0}")]
    OutOfCell(String),
    /// A field fails its own defining constraints.
    #[error("constraint violated: {0}")]
    Constraint(String),
}

/// Convenience result alias.
pub type Result<T> = std::result::Result<T, Error>;
