//! Geodemographic clustering of census regions.
//!
//! The crate is organised by pipeline phase:
//!
//! * [`ingest`] turns raw census counts into percentage features and z-scores.
//! * [`dimred`] fits Gaussian kernel PCA, measures clustering tendency and
//!   screens features by spread and redundancy.
//! * [`som`] trains a rectangular self-organizing map and evaluates it.
//! * [`validity`] groups map neurons into super-clusters and picks the count
//!   with the Silhouette / Davies-Bouldin indices.
//! * [`geo`] aggregates outcome counts per cluster and renders choropleths.
//! * [`pipeline`] wires the phases together with versioned artifacts.

pub mod artifact;
pub mod dimred;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod pipeline;
pub mod som;
pub mod validity;

pub use error::ErrorClass;
pub use ingest::{FeatureMatrix, MatrixKind};
