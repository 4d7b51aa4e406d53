//! Error type shared across the toolkit.

use thiserror::Error;

/// Unified error for tensor algebra, ellipsoid inversion, spectral
/// synthesis, measurement recovery and classification.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A modal model failed validation.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Contrast k = 1 makes the polarizability vanish identically.
    #[error("degenerate contrast: {0}")]
    DegenerateContrast(String),

    /// The requested eigenvalues admit no equivalent ellipsoid.
    #[error("no equivalent ellipsoid: {0}")]
    NotRealizable(String),

    /// An iterative solver stopped without reaching its tolerance.
    #[error("no convergence: {message} (residual {residual:.3e})")]
    Convergence { message: String, residual: f64 },

    /// Field evaluation requested at (or too near) the source point.
    #[error("singular evaluation point: {0}")]
    Singularity(String),

    /// Fewer voltage measurements than unknown coefficients.
    #[error("underdetermined system: {rows} rows for 6 unknowns")]
    Underdetermined { rows: usize },

    /// The design matrix does not separate all six coefficients.
    #[error("rank-deficient system: rank {rank}, null-space dimension {null_dim}")]
    RankDeficient { rank: usize, null_dim: usize },

    /// Feature vectors built with different layouts cannot be compared.
    #[error("incompatible feature layouts: {0}")]
    IncompatibleFeatures(String),

    /// A query frequency lies outside the snapshot range.
    #[error("extrapolation outside snapshot range: {0}")]
    Extrapolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
