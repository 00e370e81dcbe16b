//! Outcome aggregation per cluster and choropleth output.

mod cases;
mod geometry;
mod render;

use std::path::PathBuf;

use thiserror::Error;

use crate::artifact::ArtifactError;
use crate::error::ErrorClass;

pub use cases::{aggregate_cases, load_cases, parse_cases, CaseRecord, ClusterSummary, SummaryTable};
pub use geometry::{emit_geojson, load_geometries, parse_geometries, Geometry, Position, RegionGeometry};
pub use render::{render_choropleth, Choropleth, PALETTE, UNASSIGNED_COLOR};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}: region {region:?} has {cases} cases but population {population}")]
    CasesExceedPopulation {
        line: u64,
        region: String,
        cases: u64,
        population: u64,
    },
    #[error("line {line}: region {region:?} has zero population")]
    ZeroPopulation { line: u64, region: String },
    #[error("no case record for regions {0:?}")]
    MissingCases(Vec<String>),
    #[error("more than one case record for regions {0:?}")]
    DuplicateCases(Vec<String>),
    #[error("malformed GeoJSON: {0}")]
    Malformed(String),
    #[error("feature {index} has no {property:?} property")]
    MissingId { index: usize, property: String },
    #[error("region id {0:?} appears on more than one feature")]
    DuplicateId(String),
    #[error("feature {index} ({id:?}): {message}")]
    BadGeometry {
        index: usize,
        id: String,
        message: String,
    },
    #[error("summary table: {0}")]
    Summary(String),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl GeoError {
    pub fn class(&self) -> ErrorClass {
        ErrorClass::Data
    }
}
