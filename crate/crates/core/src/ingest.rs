//! Census ingestion: raw count tables, percentage features and z-scoring.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};
use crate::error::ErrorClass;

/// Columns whose population standard deviation falls below this are dropped.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed CSV: {message}")]
    Csv { line: u64, message: String },
    #[error("header has no column named {0:?}")]
    MissingColumn(String),
    #[error("no data rows")]
    NoDataRows,
    #[error("line {line}: empty region id")]
    EmptyRegionId { line: u64 },
    #[error("line {line}: duplicate region id {id:?}")]
    DuplicateRegion { id: String, line: u64 },
    #[error("line {line}, column {column:?}: {value:?} is not a non-negative integer count")]
    BadCount {
        line: u64,
        column: String,
        value: String,
    },
    #[error("recipe references unknown column {0:?}")]
    UnknownColumn(String),
    #[error("recipe defines feature {0:?} more than once")]
    DuplicateFeature(String),
    #[error("recipe feature {0:?} has no source columns")]
    EmptySources(String),
    #[error("recipe is invalid JSON: {0}")]
    Recipe(#[from] serde_json::Error),
    #[error("region {region:?}: denominator column {column:?} is zero")]
    ZeroDenominator { region: String, column: String },
    #[error("no informative features: every column is constant")]
    NoInformativeFeatures,
    #[error("feature matrix: {0}")]
    Shape(String),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl IngestError {
    pub fn class(&self) -> ErrorClass {
        match self {
            IngestError::ZeroDenominator { .. } | IngestError::NoInformativeFeatures => {
                ErrorClass::Data
            }
            IngestError::Shape(_) => ErrorClass::Validation,
            _ => ErrorClass::Data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub region_id: String,
    pub region_name: String,
    /// Counts aligned with [`RawCensusTable::column_order`].
    pub counts: Vec<u64>,
}

/// Count-valued census table, one row per region.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCensusTable {
    pub rows: Vec<CensusRow>,
    pub column_order: Vec<String>,
    index: HashMap<String, usize>,
}

impl RawCensusTable {
    pub fn new(column_order: Vec<String>, rows: Vec<CensusRow>) -> Result<Self, IngestError> {
        if rows.is_empty() {
            return Err(IngestError::NoDataRows);
        }
        let mut seen = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            let line = i as u64 + 2;
            if row.region_id.is_empty() {
                return Err(IngestError::EmptyRegionId { line });
            }
            if !seen.insert(row.region_id.as_str()) {
                return Err(IngestError::DuplicateRegion {
                    id: row.region_id.clone(),
                    line,
                });
            }
            if row.counts.len() != column_order.len() {
                return Err(IngestError::Csv {
                    line,
                    message: format!(
                        "expected {} counts, found {}",
                        column_order.len(),
                        row.counts.len()
                    ),
                });
            }
        }
        let index = column_order
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(Self {
            rows,
            column_order,
            index,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn count(&self, row: usize, column: &str) -> Option<u64> {
        self.column_index(column).map(|c| self.rows[row].counts[c])
    }
}

/// Reads a census extract with a header row.
///
/// Every column other than the id and name columns must hold non-negative
/// integer counts.
pub fn load_census(
    path: &Path,
    id_column: &str,
    name_column: &str,
) -> Result<RawCensusTable, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_census(&text, id_column, name_column)
}

pub fn parse_census(
    text: &str,
    id_column: &str,
    name_column: &str,
) -> Result<RawCensusTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| IngestError::Csv {
        line: e.position().map(|p| p.line()).unwrap_or(1),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let id_idx = find(id_column)?;
    let name_idx = find(name_column)?;
    let count_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_idx && *i != name_idx)
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let region_id = record.get(id_idx).unwrap_or("").trim().to_string();
        if region_id.is_empty() {
            return Err(IngestError::EmptyRegionId { line });
        }
        if !seen.insert(region_id.clone()) {
            return Err(IngestError::DuplicateRegion {
                id: region_id,
                line,
            });
        }
        let region_name = record.get(name_idx).unwrap_or("").trim().to_string();
        let counts = count_cols
            .iter()
            .map(|(i, col)| {
                let cell = record.get(*i).unwrap_or("").trim();
                cell.parse::<u64>().map_err(|_| IngestError::BadCount {
                    line,
                    column: col.clone(),
                    value: cell.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(CensusRow {
            region_id,
            region_name,
            counts,
        });
    }
    RawCensusTable::new(count_cols.into_iter().map(|(_, c)| c).collect(), rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// The recipe's population column.
    #[default]
    Population,
    /// Any other count column, e.g. a household total.
    Column(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedFeature {
    pub name: String,
    pub sources: Vec<String>,
    #[serde(default)]
    pub denominator: Denominator,
}

/// How percentage features are built from raw count columns.
///
/// Stored as JSON:
///
/// ```json
/// {
///   "population_column": "T1-1AGETT",
///   "features": [
///     {"name": "Age0-4", "sources": ["T1-1AGE0M", "T1-1AGE1M"]},
///     {"name": "HouseShare", "sources": ["H-SHARE"], "denominator": {"column": "H-TOTAL"}}
///   ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecipe {
    pub population_column: String,
    pub features: Vec<DerivedFeature>,
}

impl FeatureRecipe {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self, raw: &RawCensusTable) -> Result<(), IngestError> {
        let known = |c: &str| {
            raw.column_index(c)
                .map(|_| ())
                .ok_or_else(|| IngestError::UnknownColumn(c.to_string()))
        };
        known(&self.population_column)?;
        let mut names = HashSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return Err(IngestError::DuplicateFeature(f.name.clone()));
            }
            if f.sources.is_empty() {
                return Err(IngestError::EmptySources(f.name.clone()));
            }
            for s in &f.sources {
                known(s)?;
            }
            if let Denominator::Column(c) = &f.denominator {
                known(c)?;
            }
        }
        if self.features.is_empty() {
            return Err(IngestError::Shape("recipe derives no features".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    RawPercent,
    Standardized,
}

impl MatrixKind {
    fn as_str(self) -> &'static str {
        match self {
            MatrixKind::RawPercent => "raw_percent",
            MatrixKind::Standardized => "standardized",
        }
    }
}

/// Dense `n x m` region-by-feature matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    row_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Vec<f64>,
    kind: MatrixKind,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values, checking every invariant.
    pub fn new(
        row_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Vec<f64>,
        kind: MatrixKind,
    ) -> Result<Self, IngestError> {
        let (n, m) = (row_ids.len(), feature_names.len());
        if n < 2 {
            return Err(IngestError::Shape(format!("need at least 2 rows, got {n}")));
        }
        if m < 1 {
            return Err(IngestError::Shape("need at least one feature".into()));
        }
        if values.len() != n * m {
            return Err(IngestError::Shape(format!(
                "{} values for a {n}x{m} matrix",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(IngestError::Shape(format!(
                "non-finite value at row {:?}, feature {:?}",
                row_ids[i / m],
                feature_names[i % m]
            )));
        }
        let mut seen = HashSet::new();
        for id in &row_ids {
            if !seen.insert(id.as_str()) {
                return Err(IngestError::Shape(format!("duplicate row id {id:?}")));
            }
        }
        let out = Self {
            row_ids,
            feature_names,
            values,
            kind,
        };
        if kind == MatrixKind::Standardized {
            for j in 0..m {
                let (mean, std) = out.column_stats(j);
                if mean.abs() > 1e-9 || (std - 1.0).abs() > 1e-9 {
                    return Err(IngestError::Shape(format!(
                        "feature {:?} is not standardized (mean {mean}, std {std})",
                        out.feature_names[j]
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Population mean and standard deviation of column `j`.
    pub fn column_stats(&self, j: usize) -> (f64, f64) {
        population_stats(&self.column(j))
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self, IngestError> {
        let names = cols.iter().map(|&j| self.feature_names[j].clone()).collect();
        let values = self
            .rows()
            .flat_map(|r| cols.iter().map(move |&j| r[j]))
            .collect();
        Self::new(self.row_ids.clone(), names, values, self.kind)
    }

    /// Appends columns given per row, in row order.
    pub fn append_columns(
        &self,
        names: &[String],
        columns: &[Vec<f64>],
        kind: MatrixKind,
    ) -> Result<Self, IngestError> {
        let n = self.n_rows();
        if columns.len() != names.len() || columns.iter().any(|c| c.len() != n) {
            return Err(IngestError::Shape("appended columns do not match rows".into()));
        }
        let mut feature_names = self.feature_names.clone();
        feature_names.extend(names.iter().cloned());
        let values = (0..n)
            .flat_map(|i| {
                self.row(i)
                    .iter()
                    .copied()
                    .chain(columns.iter().map(move |c| c[i]))
            })
            .collect();
        Self::new(self.row_ids.clone(), feature_names, values, kind)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = artifact::csv_header(&[("kind", self.kind.as_str())]);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["region_id".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header).expect("in-memory csv");
        for (id, row) in self.row_ids.iter().zip(self.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory csv");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
        out
    }

    pub fn from_csv_str(path: &Path, text: &str) -> Result<Self, IngestError> {
        let (attrs, body) = artifact::split_csv_artifact(path, text)?;
        let kind = match attrs.get("kind").map(String::as_str) {
            Some("standardized") => MatrixKind::Standardized,
            Some("raw_percent") | None => MatrixKind::RawPercent,
            Some(other) => return Err(IngestError::Shape(format!("unknown matrix kind {other:?}"))),
        };
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let csv_err = |e: csv::Error| IngestError::Csv {
            line: e.position().map(|p| p.line() + 1).unwrap_or(2),
            message: e.to_string(),
        };
        let headers = reader.headers().map_err(csv_err)?.clone();
        let feature_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut row_ids = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map(|p| p.line() + 1).unwrap_or(0);
            row_ids.push(record.get(0).unwrap_or("").to_string());
            for (j, cell) in record.iter().skip(1).enumerate() {
                values.push(cell.parse::<f64>().map_err(|_| IngestError::Csv {
                    line,
                    message: format!("column {:?}: {cell:?} is not a number", feature_names[j]),
                })?);
            }
        }
        if row_ids.is_empty() {
            return Err(IngestError::NoDataRows);
        }
        Self::new(row_ids, feature_names, values, kind)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IngestError> {
        Ok(artifact::write_bytes(path, self.to_csv_string().as_bytes())?)
    }

    pub fn read_csv(path: &Path) -> Result<Self, IngestError> {
        let text = artifact::read_to_string(path)?;
        Self::from_csv_str(path, &text)
    }
}

pub(crate) fn population_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Percentage features plus the per-region population they were derived with.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFeatures {
    pub matrix: FeatureMatrix,
    pub population: Vec<u64>,
}

/// Builds `100 * sum(sources) / denominator` for every recipe entry.
pub fn derive_features(
    raw: &RawCensusTable,
    recipe: &FeatureRecipe,
) -> Result<DerivedFeatures, IngestError> {
    recipe.validate(raw)?;
    let pop_idx = raw.column_index(&recipe.population_column).expect("validated");
    let plan: Vec<(Vec<usize>, usize, &str)> = recipe
        .features
        .iter()
        .map(|f| {
            let sources = f
                .sources
                .iter()
                .map(|s| raw.column_index(s).expect("validated"))
                .collect();
            let (den, den_name) = match &f.denominator {
                Denominator::Population => (pop_idx, recipe.population_column.as_str()),
                Denominator::Column(c) => (raw.column_index(c).expect("validated"), c.as_str()),
            };
            (sources, den, den_name)
        })
        .collect();

    let mut values = Vec::with_capacity(raw.rows.len() * plan.len());
    for row in &raw.rows {
        for (sources, den, den_name) in &plan {
            let denominator = row.counts[*den];
            if denominator == 0 {
                return Err(IngestError::ZeroDenominator {
                    region: row.region_id.clone(),
                    column: den_name.to_string(),
                });
            }
            let numerator: u64 = sources.iter().map(|&s| row.counts[s]).sum();
            values.push(100.0 * numerator as f64 / denominator as f64);
        }
    }
    let matrix = FeatureMatrix::new(
        raw.rows.iter().map(|r| r.region_id.clone()).collect(),
        recipe.features.iter().map(|f| f.name.clone()).collect(),
        values,
        MatrixKind::RawPercent,
    )?;
    let population = raw.rows.iter().map(|r| r.counts[pop_idx]).collect();
    Ok(DerivedFeatures { matrix, population })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

/// Per-feature population mean / standard deviation used for z-scoring,
/// plus the names of columns dropped for having no variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub features: Vec<FeatureScale>,
    pub dropped: Vec<String>,
}

impl ScalingParams {
    /// Maps a standardized matrix back to percentages.
    pub fn inverse_transform(&self, z: &FeatureMatrix) -> Result<FeatureMatrix, IngestError> {
        if z.feature_names().len() != self.features.len()
            || z.feature_names()
                .iter()
                .zip(&self.features)
                .any(|(a, b)| a != &b.name)
        {
            return Err(IngestError::Shape("columns do not match scaling params".into()));
        }
        let values = z
            .rows()
            .flat_map(|r| r.iter().zip(&self.features).map(|(v, s)| v * s.std + s.mean))
            .collect();
        FeatureMatrix::new(
            z.row_ids().to_vec(),
            z.feature_names().to_vec(),
            values,
            MatrixKind::RawPercent,
        )
    }
}

/// Z-scores every column with the population (1/n) standard deviation.
///
/// Constant columns are dropped and listed in [`ScalingParams::dropped`].
pub fn standardize(x: &FeatureMatrix) -> Result<(FeatureMatrix, ScalingParams), IngestError> {
    let mut keep = Vec::new();
    let mut features = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..x.n_features() {
        let (mean, std) = x.column_stats(j);
        let name = x.feature_names()[j].clone();
        if std < MIN_STD {
            log::warn!("dropping constant feature {name:?}");
            dropped.push(name);
        } else {
            keep.push(j);
            features.push(FeatureScale { name, mean, std });
        }
    }
    if keep.is_empty() {
        return Err(IngestError::NoInformativeFeatures);
    }
    let values = x
        .rows()
        .flat_map(|r| {
            keep.iter()
                .zip(&features)
                .map(move |(&j, s)| (r[j] - s.mean) / s.std)
        })
        .collect();
    let z = FeatureMatrix::new(
        x.row_ids().to_vec(),
        features.iter().map(|f| f.name.clone()).collect(),
        values,
        MatrixKind::Standardized,
    )?;
    Ok((z, ScalingParams { features, dropped }))
}
