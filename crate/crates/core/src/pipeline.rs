//! End-to-end orchestration: config file, per-phase runners and the run manifest.
//!
//! Every phase reads its inputs from and writes its outputs to the output
//! directory, so phases can also be run one at a time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};
use crate::dimred::{
    explained_variance_fractions, feature_weighted_variance, fit_kpca, hopkins, leverage_weights,
    median_pairwise_distance, project, relevance_r2, select_features, DimredError, KernelSpec,
    ScreeningInputs, DEFAULT_FEATURE_COUNT,
};
use crate::error::ErrorClass;
use crate::geo::{
    aggregate_cases, load_cases, load_geometries, render_choropleth, GeoError, SummaryTable,
};
use crate::ingest::{derive_features, load_census, standardize, FeatureMatrix, FeatureRecipe, IngestError, MatrixKind};
use crate::som::{
    quantization_error, topographic_error, total_distortion, SomConfig, SomError, SomModel,
    DEFAULT_COLS, DEFAULT_ROWS, DEFAULT_THETA0,
};
use crate::validity::{
    assign_regions, scan_k, supercluster, ClusterAssignment, ValidityError, DEFAULT_K_MAX,
    DEFAULT_K_MIN,
};

/// Artifact file names inside the output directory.
pub mod files {
    pub const FEATURES: &str = "features.csv";
    pub const SCALING: &str = "scaling.json";
    pub const KERNEL_MODEL: &str = "kernel_model.json";
    pub const FEATURE_SCORES: &str = "feature_scores.csv";
    pub const REDUCED: &str = "reduced.csv";
    pub const DIMRED_REPORT: &str = "dimred_report.json";
    pub const SOM_MODEL: &str = "som_model.json";
    pub const SOM_REPORT: &str = "som_report.json";
    pub const VALIDITY: &str = "validity.csv";
    pub const ASSIGNMENT: &str = "assignment.csv";
    pub const CLUSTER_SUMMARY: &str = "cluster_summary.csv";
    pub const GEOJSON: &str = "clusters.geojson";
    pub const SVG: &str = "clusters.svg";
    pub const MANIFEST: &str = "manifest.json";

    /// Everything hashed into the manifest, in pipeline order.
    pub const ALL: [&str; 13] = [
        FEATURES,
        SCALING,
        KERNEL_MODEL,
        FEATURE_SCORES,
        REDUCED,
        DIMRED_REPORT,
        SOM_MODEL,
        SOM_REPORT,
        VALIDITY,
        ASSIGNMENT,
        CLUSTER_SUMMARY,
        GEOJSON,
        SVG,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub census: PathBuf,
    pub recipe: PathBuf,
    pub cases: PathBuf,
    pub geometries: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusColumns {
    pub id_column: String,
    pub name_column: String,
}

impl Default for CensusColumns {
    fn default() -> Self {
        Self {
            id_column: "GEOGID".into(),
            name_column: "GEOGDESC".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    #[default]
    Gaussian,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimredSettings {
    pub kernel: KernelChoice,
    /// Gaussian bandwidth; the median pairwise distance when absent.
    pub sigma: Option<f64>,
    /// Kernel components kept (capped at n - 1).
    pub components: usize,
    pub feature_count: usize,
    pub hopkins_fraction: f64,
}

impl Default for DimredSettings {
    fn default() -> Self {
        Self {
            kernel: KernelChoice::Gaussian,
            sigma: None,
            components: 5,
            feature_count: DEFAULT_FEATURE_COUNT,
            hopkins_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SomSettings {
    pub rows: usize,
    pub cols: usize,
    /// Initial radius; half the longer lattice side when absent.
    pub sigma0: Option<f64>,
    pub theta0: f64,
    /// `G`; `iterations / ln(sigma0)` when absent.
    pub time_constant: Option<f64>,
    pub iterations: usize,
}

impl Default for SomSettings {
    fn default() -> Self {
        Self {
            rows: DEFAULT_ROWS,
            cols: DEFAULT_COLS,
            sigma0: None,
            theta0: DEFAULT_THETA0,
            time_constant: None,
            iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValiditySettings {
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for ValiditySettings {
    fn default() -> Self {
        Self {
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_geometry_id() -> String {
    "GEOGID".into()
}

/// One JSON document describing a run. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub census: CensusColumns,
    #[serde(default = "default_geometry_id")]
    pub geometry_id_property: String,
    #[serde(default)]
    pub dimred: DimredSettings,
    #[serde(default)]
    pub som: SomSettings,
    #[serde(default)]
    pub validity: ValiditySettings,
    /// Append z-scored population and case counts to the selected features.
    #[serde(default = "default_true")]
    pub include_outcome_features: bool,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let p = &mut cfg.paths;
        for path in [&mut p.census, &mut p.recipe, &mut p.cases, &mut p.geometries, &mut p.output_dir] {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }

    pub fn som_config(&self) -> SomConfig {
        let s = &self.som;
        let sigma0 = s.sigma0.unwrap_or(s.rows.max(s.cols) as f64 / 2.0);
        let mut c = SomConfig::new(s.rows, s.cols, sigma0, s.theta0, s.iterations, self.seed);
        if let Some(g) = s.time_constant {
            c.time_constant = g;
        }
        c
    }

    /// Checks numeric ranges and input paths without reading any data.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let d = &self.dimred;
        if !(d.hopkins_fraction > 0.0 && d.hopkins_fraction < 1.0) {
            return bad(format!("hopkins_fraction {} is outside (0, 1)", d.hopkins_fraction));
        }
        if d.components == 0 {
            return bad("dimred.components must be positive".into());
        }
        if d.feature_count == 0 {
            return bad("dimred.feature_count must be positive".into());
        }
        if let Some(s) = d.sigma {
            KernelSpec::gaussian(s).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        self.som_config()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let v = &self.validity;
        let neurons = self.som.rows * self.som.cols;
        if v.k_min < 2 || v.k_min > v.k_max {
            return bad(format!("invalid cluster-count range [{}, {}]", v.k_min, v.k_max));
        }
        if v.k_max > neurons {
            return bad(format!(
                "k_max {} exceeds the {} neurons of a {}x{} lattice",
                v.k_max, neurons, self.som.rows, self.som.cols
            ));
        }
        for (what, p) in [
            ("census", &self.paths.census),
            ("recipe", &self.paths.recipe),
            ("cases", &self.paths.cases),
            ("geometries", &self.paths.geometries),
        ] {
            if !p.is_file() {
                return bad(format!("{what} file {} does not exist", p.display()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Ingest,
    Reduce,
    Train,
    Validate,
    Report,
    Render,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Ingest,
        Phase::Reduce,
        Phase::Train,
        Phase::Validate,
        Phase::Report,
        Phase::Render,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Ingest => "ingest",
            Phase::Reduce => "reduce",
            Phase::Train => "train",
            Phase::Validate => "validate",
            Phase::Report => "report",
            Phase::Render => "render",
        }
    }

    fn marker(self) -> String {
        format!("{}.failed", self.name())
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dimred(#[from] DimredError),
    #[error(transparent)]
    Som(#[from] SomError),
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("{phase} phase failed: {source}")]
    Phase {
        phase: Phase,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PipelineError::Config(_) => ErrorClass::Validation,
            PipelineError::Ingest(e) => e.class(),
            PipelineError::Dimred(e) => e.class(),
            PipelineError::Som(e) => e.class(),
            PipelineError::Validity(e) => e.class(),
            PipelineError::Geo(e) => e.class(),
            PipelineError::Artifact(e) => e.class(),
            PipelineError::Phase { source, .. } => source.class(),
        }
    }
}

/// Summary of the reduction phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimredReport {
    pub kernel: KernelSpec,
    pub components: usize,
    pub explained_variance: Vec<f64>,
    /// Clustering tendency of the full standardized matrix.
    pub hopkins_before: f64,
    /// Clustering tendency of the selected features alone.
    pub hopkins_after: f64,
    pub selected_features: Vec<String>,
    pub outcome_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomReport {
    pub quantization_error: f64,
    pub topographic_error: f64,
    pub total_distortion: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: Phase,
    pub seconds: f64,
}

/// Record of a full run. Hashes are SHA-256 of the emitted files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: PipelineConfig,
    pub artifacts: BTreeMap<String, String>,
    pub phases: Vec<PhaseTiming>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Ok(artifact::read_json(path)?)
    }
}

/// z-scores a column with the population standard deviation.
fn zscore(xs: &[f64]) -> Option<Vec<f64>> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (std > crate::ingest::MIN_STD).then(|| xs.iter().map(|x| (x - mean) / std).collect())
}

pub fn run_ingest(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let raw = load_census(&cfg.paths.census, &cfg.census.id_column, &cfg.census.name_column)?;
    let recipe = FeatureRecipe::load(&cfg.paths.recipe)?;
    let derived = derive_features(&raw, &recipe)?;
    let (z, scaling) = standardize(&derived.matrix)?;
    log::info!("ingest: {} regions x {} features", z.n_rows(), z.n_features());
    z.write_csv(&cfg.output(files::FEATURES))?;
    artifact::write_json(&cfg.output(files::SCALING), &scaling)?;
    Ok(())
}

pub fn run_reduce(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let z = FeatureMatrix::read_csv(&cfg.output(files::FEATURES))?;
    if z.kind() != MatrixKind::Standardized {
        return Err(PipelineError::Config(format!(
            "{} must hold standardized features",
            files::FEATURES
        )));
    }
    let spec = match cfg.dimred.kernel {
        KernelChoice::Linear => KernelSpec::Linear,
        KernelChoice::Gaussian => {
            let sigma = match cfg.dimred.sigma {
                Some(s) => s,
                None => median_pairwise_distance(&z)?,
            };
            KernelSpec::gaussian(sigma)?
        }
    };
    let k = cfg.dimred.components.min(z.n_rows() - 1);
    let model = fit_kpca(&z, &spec, k)?;
    let weights = leverage_weights(&project(&model, &z)?);
    let inputs = ScreeningInputs {
        names: z.feature_names().to_vec(),
        weighted_variance: feature_weighted_variance(&z, &weights)?,
        relevance: relevance_r2(&z),
        fractions: explained_variance_fractions(&model)?,
    };
    let scores = select_features(&inputs, cfg.dimred.feature_count)?;
    let keep: Vec<usize> = scores
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.selected)
        .map(|(j, _)| j)
        .collect();
    let selected = z.select_columns(&keep)?;

    let f = cfg.dimred.hopkins_fraction;
    let hopkins_before = hopkins(&z, f, cfg.seed)?;
    let hopkins_after = hopkins(&selected, f, cfg.seed)?;
    log::info!("reduce: hopkins {hopkins_before:.4} -> {hopkins_after:.4}");

    let mut reduced = selected;
    let mut outcome_features = Vec::new();
    if cfg.include_outcome_features {
        let cases = load_cases(&cfg.paths.cases)?;
        let by_id: HashMap<&str, _> = cases.iter().map(|c| (c.region_id.as_str(), c)).collect();
        let missing: Vec<String> = reduced
            .row_ids()
            .iter()
            .filter(|id| !by_id.contains_key(id.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(GeoError::MissingCases(missing).into());
        }
        let ids = reduced.row_ids();
        let population: Vec<f64> = ids.iter().map(|id| by_id[id.as_str()].population as f64).collect();
        let counts: Vec<f64> = ids.iter().map(|id| by_id[id.as_str()].cases as f64).collect();
        let mut names = Vec::new();
        let mut cols = Vec::new();
        for (name, raw) in [("population", population), ("cases", counts)] {
            match zscore(&raw) {
                Some(col) => {
                    names.push(name.to_string());
                    cols.push(col);
                }
                None => log::warn!("outcome column {name} is constant and was not appended"),
            }
        }
        reduced = reduced.append_columns(&names, &cols, MatrixKind::Standardized)?;
        outcome_features = names;
    }

    model.save(&cfg.output(files::KERNEL_MODEL))?;
    scores.write_csv(&cfg.output(files::FEATURE_SCORES))?;
    reduced.write_csv(&cfg.output(files::REDUCED))?;
    let report = DimredReport {
        kernel: spec,
        components: k,
        explained_variance: scores.explained_variance.clone(),
        hopkins_before,
        hopkins_after,
        selected_features: scores.selected_names(),
        outcome_features,
    };
    artifact::write_json(&cfg.output(files::DIMRED_REPORT), &report)?;
    Ok(())
}

pub fn run_train(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let x = FeatureMatrix::read_csv(&cfg.output(files::REDUCED))?;
    let config = cfg.som_config();
    config.validate()?;
    let model = crate::som::train(&x, &config)?;
    let report = SomReport {
        quantization_error: quantization_error(&x, &model)?,
        topographic_error: topographic_error(&x, &model)?,
        total_distortion: total_distortion(&x, &model)?,
        epochs: model.history.len(),
    };
    log::info!(
        "train: QE {:.4}, topographic error {:.4}",
        report.quantization_error,
        report.topographic_error
    );
    model.save(&cfg.output(files::SOM_MODEL))?;
    artifact::write_json(&cfg.output(files::SOM_REPORT), &report)?;
    Ok(())
}

pub fn run_validate(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let model = SomModel::load(&cfg.output(files::SOM_MODEL))?;
    let x = FeatureMatrix::read_csv(&cfg.output(files::REDUCED))?;
    let report = scan_k(&model, cfg.validity.k_min, cfg.validity.k_max)?;
    log::info!("validate: chose k = {}", report.chosen_k);
    report.write_csv(&cfg.output(files::VALIDITY))?;
    let clustering = supercluster(&model, report.chosen_k)?;
    assign_regions(&model, &clustering, &x)?.write_csv(&cfg.output(files::ASSIGNMENT))?;
    Ok(())
}

pub fn run_report(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let assignment = ClusterAssignment::read_csv(&cfg.output(files::ASSIGNMENT))?;
    let cases = load_cases(&cfg.paths.cases)?;
    let table = SummaryTable(aggregate_cases(&assignment, &cases)?);
    table.write_csv(&cfg.output(files::CLUSTER_SUMMARY))?;
    Ok(())
}

pub fn run_render(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let assignment = ClusterAssignment::read_csv(&cfg.output(files::ASSIGNMENT))?;
    let geometries = load_geometries(&cfg.paths.geometries, &cfg.geometry_id_property)?;
    let summary = SummaryTable::read_csv(&cfg.output(files::CLUSTER_SUMMARY))?;
    render_choropleth(&assignment, &geometries, &summary.0)
        .write(&cfg.output(files::GEOJSON), &cfg.output(files::SVG))?;
    Ok(())
}

/// Runs one phase. On failure a `<phase>.failed` marker holding the error
/// message is left in the output directory next to any partial artifacts.
pub fn run_phase(cfg: &PipelineConfig, phase: Phase) -> Result<(), PipelineError> {
    let marker = cfg.output(&phase.marker());
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(artifact::io_err(&marker))?;
    }
    let result = match phase {
        Phase::Ingest => run_ingest(cfg),
        Phase::Reduce => run_reduce(cfg),
        Phase::Train => run_train(cfg),
        Phase::Validate => run_validate(cfg),
        Phase::Report => run_report(cfg),
        Phase::Render => run_render(cfg),
    };
    result.map_err(|e| {
        let _ = artifact::write_bytes(&marker, format!("{e}\n").as_bytes());
        PipelineError::Phase {
            phase,
            source: Box::new(e),
        }
    })
}

/// Validates the config, runs every phase in order and writes the manifest.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let mut phases = Vec::new();
    for phase in Phase::ALL {
        let start = Instant::now();
        run_phase(cfg, phase)?;
        phases.push(PhaseTiming {
            phase,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let mut artifacts = BTreeMap::new();
    for name in files::ALL {
        artifacts.insert(name.to_string(), artifact::sha256_file(&cfg.output(name))?);
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        artifacts,
        phases,
    };
    artifact::write_json(&cfg.output(files::MANIFEST), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"paths": {"census": "c.csv", "recipe": "r.json", "cases": "k.csv",
        "geometries": "g.geojson", "output_dir": "out"}}"#;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = PipelineConfig::from_json(MINIMAL, Path::new("/data/run")).unwrap();
        assert_eq!(cfg.paths.census, Path::new("/data/run/c.csv"));
        assert_eq!(cfg.dimred.feature_count, 21);
        assert_eq!((cfg.validity.k_min, cfg.validity.k_max), (3, 9));
        assert_eq!((cfg.som.rows, cfg.som.cols), (18, 15));
        assert_eq!(cfg.som.theta0, 0.57);
        assert!(cfg.include_outcome_features);
        assert_eq!(cfg.som_config().sigma0, 9.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"paths\"", "\"sede\": 1, \"paths\"");
        assert!(matches!(
            PipelineConfig::from_json(&text, Path::new("")),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn k_max_beyond_lattice_is_a_validation_error() {
        let mut cfg = PipelineConfig::from_json(MINIMAL, Path::new("/nonexistent")).unwrap();
        cfg.som.rows = 2;
        cfg.som.cols = 2;
        cfg.som.sigma0 = Some(1.5);
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.class(), ErrorClass::Validation);
        assert!(err.to_string().contains("k_max 9 exceeds the 4 neurons"), "{err}");
    }
}
