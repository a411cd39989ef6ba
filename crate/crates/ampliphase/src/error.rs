//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A physical parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {value} (expected {expected})")]
    InvalidParam {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A truncated sum did not reach the requested tail tolerance.
    #[error(
        "convergence failure in {what}: tail bound {tail:.3e} exceeds tolerance {tol:.3e} \
         at cutoff {cutoff}"
    )]
    Convergence {
        what: &'static str,
        tail: f64,
        tol: f64,
        cutoff: usize,
    },

    /// The signal slope vanishes at the requested phase, so error propagation
    /// is undefined there.
    #[error("insensitive working point: |∂⟨D⟩/∂φ| ≈ 0 at φ = {phi}")]
    InsensitiveWorkingPoint { phi: f64 },

    /// Every posterior weight underflowed to zero.
    #[error("posterior underflow: all {grid_points} grid weights vanished")]
    PosteriorUnderflow { grid_points: usize },

    /// An estimation run was configured inconsistently.
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
