//! Kernel PCA feature extraction and feature screening.
//!
//! The reduction phase fits a Gaussian kernel PCA on the standardized census
//! matrix, derives per-region weights from the kernel scores, and ranks the
//! original features by weighted spread and by how predictable each one is
//! from the others. The top features are kept for map training.

mod hopkins;
mod kernel;
mod kpca;
mod screening;

use thiserror::Error;

use crate::artifact::ArtifactError;
use crate::error::ErrorClass;

pub use hopkins::hopkins;
pub use kernel::{
    build_centered_kernel, kernel_matrix, kernel_value, median_pairwise_distance, CenteredKernel,
    CenteringStats, KernelSpec,
};
pub use kpca::{explained_variance_fractions, fit_kpca, leverage_weights, project, KernelModel};
pub use screening::{
    feature_weighted_variance, relevance_r2, select_features, FeatureScore, FeatureScoreReport,
    Relevance, ScreeningInputs, RIDGE_PENALTY,
};

/// Default number of retained features.
pub const DEFAULT_FEATURE_COUNT: usize = 21;

/// Relative threshold under which an eigenvalue counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DimredError {
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("gaussian bandwidth must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("cannot retain {k} components from {n} rows (max {max})")]
    TooManyComponents { k: usize, n: usize, max: usize },
    #[error("kernel matrix has non-finite entries")]
    NonFiniteKernel,
    #[error("feature columns do not match the fitted model: {0}")]
    ColumnMismatch(String),
    #[error("all eigenvalues are zero")]
    AllEigenvaluesZero,
    #[error("weight {index} is not positive: {value}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("sample fraction {0} is outside (0, 1)")]
    FractionOutOfRange(f64),
    #[error("need at least {min} rows, got {n}")]
    TooFewRows { n: usize, min: usize },
    #[error("feature count {count} is outside 1..={max}")]
    CountOutOfRange { count: usize, max: usize },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl DimredError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DimredError::NonFiniteKernel | DimredError::AllEigenvaluesZero => ErrorClass::Numerical,
            DimredError::Artifact(_) => ErrorClass::Data,
            _ => ErrorClass::Validation,
        }
    }
}
