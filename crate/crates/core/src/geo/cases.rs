use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GeoError;
use crate::artifact;
use crate::validity::ClusterAssignment;

/// Outcome count and population of one region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub region_id: String,
    pub cases: u64,
    pub population: u64,
}

pub fn load_cases(path: &Path) -> Result<Vec<CaseRecord>, GeoError> {
    let text = std::fs::read_to_string(path).map_err(|source| GeoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cases(&text)
}

/// Parses `region_id,cases,population` rows (header required).
pub fn parse_cases(text: &str) -> Result<Vec<CaseRecord>, GeoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.deserialize::<CaseRecord>() {
        let rec = rec.map_err(|e| GeoError::Csv {
            line: e.position().map_or(1, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = out.len() as u64 + 2;
        if rec.population == 0 {
            return Err(GeoError::ZeroPopulation {
                line,
                region: rec.region_id,
            });
        }
        if rec.cases > rec.population {
            return Err(GeoError::CasesExceedPopulation {
                line,
                region: rec.region_id,
                cases: rec.cases,
                population: rec.population,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Totals for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: usize,
    pub regions: usize,
    pub total_cases: u64,
    pub total_population: u64,
    /// `total_cases / total_population`.
    pub rate: f64,
}

impl ClusterSummary {
    /// Rate rounded to four decimals, as printed in reports.
    pub fn display_rate(&self) -> String {
        format!("{:.4}", self.rate)
    }
}

/// Sums cases and population per cluster, ordered by cluster id.
///
/// Every assigned region needs exactly one case record. Clusters that
/// received no regions are left out. Records for regions outside the
/// assignment are ignored with a warning.
pub fn aggregate_cases(
    assignment: &ClusterAssignment,
    cases: &[CaseRecord],
) -> Result<Vec<ClusterSummary>, GeoError> {
    let mut by_region: HashMap<&str, Vec<&CaseRecord>> = HashMap::new();
    for c in cases {
        by_region.entry(c.region_id.as_str()).or_default().push(c);
    }
    let mut missing = Vec::new();
    let mut dup = Vec::new();
    for r in &assignment.regions {
        match by_region.get(r.region_id.as_str()).map(Vec::len) {
            None => missing.push(r.region_id.clone()),
            Some(1) => {}
            Some(_) => dup.push(r.region_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(GeoError::MissingCases(missing));
    }
    if !dup.is_empty() {
        return Err(GeoError::DuplicateCases(dup));
    }
    let extra = cases.len() - assignment.regions.len();
    if extra > 0 {
        log::warn!("{extra} case records do not match any assigned region");
    }

    let mut totals: BTreeMap<usize, (usize, u64, u64)> = BTreeMap::new();
    for r in &assignment.regions {
        let c = by_region[r.region_id.as_str()][0];
        let t = totals.entry(r.cluster).or_default();
        t.0 += 1;
        t.1 += c.cases;
        t.2 += c.population;
    }
    Ok(totals
        .into_iter()
        .map(|(cluster_id, (regions, total_cases, total_population))| ClusterSummary {
            cluster_id,
            regions,
            total_cases,
            total_population,
            rate: total_cases as f64 / total_population as f64,
        })
        .collect())
}

/// Cluster summaries as a CSV artifact shaped like the published table:
/// `cluster,regions,cases,population,rate,rate_4dp`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable(pub Vec<ClusterSummary>);

impl SummaryTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = artifact::csv_header(&[]);
        out.push_str("cluster,regions,cases,population,rate,rate_4dp\n");
        for s in &self.0 {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.cluster_id,
                s.regions,
                s.total_cases,
                s.total_population,
                s.rate,
                s.display_rate()
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), GeoError> {
        Ok(artifact::write_bytes(path, self.to_csv_string().as_bytes())?)
    }

    pub fn from_csv_str(path: &Path, text: &str) -> Result<Self, GeoError> {
        let (_, body) = artifact::split_csv_artifact(path, text)?;
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| GeoError::Summary(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |i: usize| GeoError::Summary(format!("bad value {:?}", field(i)));
            rows.push(ClusterSummary {
                cluster_id: field(0).parse().map_err(|_| bad(0))?,
                regions: field(1).parse().map_err(|_| bad(1))?,
                total_cases: field(2).parse().map_err(|_| bad(2))?,
                total_population: field(3).parse().map_err(|_| bad(3))?,
                rate: field(4).parse().map_err(|_| bad(4))?,
            });
        }
        Ok(Self(rows))
    }

    pub fn read_csv(path: &Path) -> Result<Self, GeoError> {
        let text = artifact::read_to_string(path)?;
        Self::from_csv_str(path, &text)
    }
}
