//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the pipeline.
///
/// The variants are grouped by how a driver should react: bad caller input,
/// numeric/algorithmic failure, or a continuation run that finished without a
/// contraction certificate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Resonance vectors with first component ≠ 1 are rejected rather than
    /// reduced; the chart construction assumes the fast angle winds once.
    #[error("unsupported resonance: {0}")]
    UnsupportedResonance(String),

    /// The twist matrix is (numerically) singular, so the action translation
    /// that keeps the frequency fixed cannot be solved.
    #[error("twist violation: {0}")]
    TwistViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failure: {0}")]
    Integration(String),

    /// Kernel analysis needs a one-dimensional kernel of the leading block;
    /// anything else is outside the supported bifurcation scenario.
    #[error("unsupported degeneracy: {0}")]
    UnsupportedDegeneracy(String),

    /// A continuation finished but the Kantorovich condition h < 1/4 failed.
    #[error("certification failure: {0}")]
    Certification(String),

    #[error("term budget exceeded: {0}")]
    Resource(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("serialization: {0}")]
    Serialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for CoreError {
    fn from(e: serde_json::Error) -> Self {
        CoreError::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
