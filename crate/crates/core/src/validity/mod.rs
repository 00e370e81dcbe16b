//! Super-clustering of map neurons and cluster-count selection.

mod indices;
mod scan;
mod ward;

use thiserror::Error;

use crate::artifact::ArtifactError;
use crate::error::ErrorClass;

pub use indices::{dbi, silhouette, Silhouette};
pub use scan::{
    assign_regions, choose_k, scan_k, supercluster, ClusterAssignment, RegionAssignment,
    SuperClustering, ValidityReport, ValidityRow,
};
pub use ward::{ward_linkage, Dendrogram, Merge};

pub const DEFAULT_K_MIN: usize = 3;
pub const DEFAULT_K_MAX: usize = 9;

#[derive(Debug, Error)]
pub enum ValidityError {
    #[error("cluster count {k} is outside {min}..={max}")]
    KOutOfRange { k: usize, min: usize, max: usize },
    #[error("invalid cluster-count range [{k_min}, {k_max}]")]
    InvalidRange { k_min: usize, k_max: usize },
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("clusters {0} and {1} have coincident centroids")]
    CoincidentCentroids(usize, usize),
    #[error("every cluster is a singleton; the Davies-Bouldin index is undefined")]
    AllSingletons,
    #[error("need at least two clusters, got {0}")]
    TooFewClusters(usize),
    #[error("{points} points but {labels} labels")]
    LabelMismatch { points: usize, labels: usize },
    #[error("dimension mismatch: model has {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("assignment file: {0}")]
    Parse(String),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl ValidityError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ValidityError::CoincidentCentroids(..) | ValidityError::AllSingletons => {
                ErrorClass::Numerical
            }
            ValidityError::Parse(_) | ValidityError::Artifact(_) => ErrorClass::Data,
            _ => ErrorClass::Validation,
        }
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
