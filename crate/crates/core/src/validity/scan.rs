use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ward::ward_linkage;
use super::{dbi, silhouette, Dendrogram, ValidityError};
use crate::artifact;
use crate::ingest::FeatureMatrix;
use crate::som::{bmu, SomModel};

/// Neurons grouped into `k` super-clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperClustering {
    pub k: usize,
    /// Label in `0..k` per neuron, numbered by first appearance.
    pub neuron_labels: Vec<usize>,
    /// Mean weight vector of each cluster's neurons.
    pub centroids: Vec<Vec<f64>>,
}

impl SuperClustering {
    fn from_labels(weights: &[Vec<f64>], labels: Vec<usize>, k: usize) -> Self {
        let m = weights.first().map_or(0, Vec::len);
        let mut sums = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (w, &l) in weights.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(w) {
                *s += v;
            }
        }
        let centroids = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| s.into_iter().map(|v| v / c as f64).collect())
            .collect();
        Self {
            k,
            neuron_labels: labels,
            centroids,
        }
    }
}

fn distinct_count(weights: &[Vec<f64>]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for w in weights {
        if !seen.contains(&w) {
            seen.push(w);
        }
    }
    seen.len()
}

fn check_k(k: usize, weights: &[Vec<f64>]) -> Result<(), ValidityError> {
    let max = distinct_count(weights);
    if k < 2 || k > max {
        return Err(ValidityError::KOutOfRange { k, min: 2, max });
    }
    Ok(())
}

/// Ward-linkage clustering of the neuron weight vectors into `k` groups.
pub fn supercluster(model: &SomModel, k: usize) -> Result<SuperClustering, ValidityError> {
    check_k(k, &model.weights)?;
    let tree = ward_linkage(&model.weights);
    Ok(SuperClustering::from_labels(&model.weights, tree.cut(k), k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityRow {
    pub k: usize,
    pub silhouette: f64,
    pub dbi: f64,
}

/// Validity indices for each candidate cluster count and the chosen count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub rows: Vec<ValidityRow>,
    pub chosen_k: usize,
    /// Count minimising the Davies-Bouldin index, reported for comparison.
    pub dbi_argmin_k: usize,
}

impl ValidityReport {
    pub fn chosen(&self) -> &ValidityRow {
        self.rows
            .iter()
            .find(|r| r.k == self.chosen_k)
            .expect("chosen k is one of the rows")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = artifact::csv_header(&[]);
        out.push_str("k,silhouette,dbi\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.k, r.silhouette, r.dbi));
        }
        out.push_str(&format!("# chosen_k={}\n", self.chosen_k));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ValidityError> {
        Ok(artifact::write_bytes(path, self.to_csv_string().as_bytes())?)
    }
}

/// Picks the count with the highest silhouette (smaller k on ties) and
/// warns when the Davies-Bouldin minimum points elsewhere.
pub fn choose_k(rows: &[ValidityRow]) -> Result<ValidityReport, ValidityError> {
    let first = rows.first().ok_or(ValidityError::InvalidRange { k_min: 0, k_max: 0 })?;
    let mut best = first;
    let mut best_dbi = first;
    for r in rows {
        if r.silhouette > best.silhouette || (r.silhouette == best.silhouette && r.k < best.k) {
            best = r;
        }
        if r.dbi < best_dbi.dbi || (r.dbi == best_dbi.dbi && r.k < best_dbi.k) {
            best_dbi = r;
        }
    }
    if best.k != best_dbi.k {
        log::warn!(
            "silhouette prefers k={} but Davies-Bouldin prefers k={}",
            best.k,
            best_dbi.k
        );
    }
    Ok(ValidityReport {
        rows: rows.to_vec(),
        chosen_k: best.k,
        dbi_argmin_k: best_dbi.k,
    })
}

/// Evaluates both indices over neuron weights for every k in `[k_min, k_max]`.
pub fn scan_k(model: &SomModel, k_min: usize, k_max: usize) -> Result<ValidityReport, ValidityError> {
    if k_min < 2 || k_min > k_max {
        return Err(ValidityError::InvalidRange { k_min, k_max });
    }
    check_k(k_max, &model.weights)?;
    let tree: Dendrogram = ward_linkage(&model.weights);
    let rows = (k_min..=k_max)
        .map(|k| {
            let sc = SuperClustering::from_labels(&model.weights, tree.cut(k), k);
            Ok(ValidityRow {
                k,
                silhouette: silhouette(&model.weights, &sc.neuron_labels)?.mean,
                dbi: dbi(&model.weights, &sc.neuron_labels, &sc.centroids)?,
            })
        })
        .collect::<Result<Vec<_>, ValidityError>>()?;
    choose_k(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAssignment {
    pub region_id: String,
    pub bmu: usize,
    /// 1-based cluster id (super-cluster label + 1).
    pub cluster: usize,
}

/// Region -> BMU -> super-cluster mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub regions: Vec<RegionAssignment>,
}

impl ClusterAssignment {
    pub fn cluster_of(&self, region_id: &str) -> Option<usize> {
        self.regions
            .iter()
            .find(|r| r.region_id == region_id)
            .map(|r| r.cluster)
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for r in &self.regions {
            c[r.cluster - 1] += 1;
        }
        c
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = artifact::csv_header(&[("k", &self.k.to_string())]);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["region_id", "bmu", "cluster"]).expect("in-memory csv");
        for r in &self.regions {
            w.serialize((&r.region_id, r.bmu, r.cluster)).expect("in-memory csv");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ValidityError> {
        Ok(artifact::write_bytes(path, self.to_csv_string().as_bytes())?)
    }

    pub fn from_csv_str(path: &Path, text: &str) -> Result<Self, ValidityError> {
        let (attrs, body) = artifact::split_csv_artifact(path, text)?;
        let k: usize = attrs
            .get("k")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ValidityError::Parse("missing k attribute".into()))?;
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let regions = reader
            .deserialize::<RegionAssignment>()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ValidityError::Parse(e.to_string()))?;
        if let Some(bad) = regions.iter().find(|r| r.cluster == 0 || r.cluster > k) {
            return Err(ValidityError::Parse(format!(
                "region {:?} has cluster {} outside 1..={k}",
                bad.region_id, bad.cluster
            )));
        }
        Ok(Self { k, regions })
    }

    pub fn read_csv(path: &Path) -> Result<Self, ValidityError> {
        let text = artifact::read_to_string(path)?;
        Self::from_csv_str(path, &text)
    }
}

/// Labels each region with the super-cluster of its BMU.
pub fn assign_regions(
    model: &SomModel,
    clustering: &SuperClustering,
    x: &FeatureMatrix,
) -> Result<ClusterAssignment, ValidityError> {
    if x.n_features() != model.dim() {
        return Err(ValidityError::DimensionMismatch {
            expected: model.dim(),
            found: x.n_features(),
        });
    }
    let regions = x
        .row_ids()
        .iter()
        .zip(x.rows())
        .map(|(id, row)| {
            let b = bmu(row, model).expect("dimensions checked");
            RegionAssignment {
                region_id: id.clone(),
                bmu: b,
                cluster: clustering.neuron_labels[b] + 1,
            }
        })
        .collect();
    Ok(ClusterAssignment {
        k: clustering.k,
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::MatrixKind;
    use crate::som::{Lattice, SomConfig};

    fn model(weights: Vec<Vec<f64>>, rows: usize, cols: usize) -> SomModel {
        SomModel {
            lattice: Lattice::new(rows, cols),
            feature_names: (0..weights[0].len()).map(|j| format!("f{j}")).collect(),
            weights,
            config: SomConfig::new(rows, cols, 1.0, 0.5, 1, 0),
            history: vec![],
        }
    }

    fn table3() -> Vec<ValidityRow> {
        [
            (3, 0.4212, 0.1721),
            (4, 0.4961, 0.1281),
            (5, 0.5007, 0.0998),
            (6, 0.6741, 0.0954),
            (7, 0.8311, 0.0704),
            (8, 0.8019, 0.0731),
            (9, 0.7702, 0.0782),
        ]
        .into_iter()
        .map(|(k, silhouette, dbi)| ValidityRow { k, silhouette, dbi })
        .collect()
    }

    #[test]
    fn published_rows_select_seven() {
        let r = choose_k(&table3()).unwrap();
        assert_eq!(r.chosen_k, 7);
        assert_eq!(r.dbi_argmin_k, 7);
        assert_eq!(r.chosen().silhouette, 0.8311);
        assert_eq!(r.chosen().dbi, 0.0704);
    }

    fn two_groups() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.1],
            vec![9.0, 9.0],
            vec![0.2, 0.0],
            vec![9.1, 8.8],
            vec![0.1, 0.3],
            vec![8.9, 9.2],
        ]
    }

    #[test]
    fn supercluster_two_groups_and_singletons() {
        let m = model(two_groups(), 2, 3);
        let sc = supercluster(&m, 2).unwrap();
        assert_eq!(sc.neuron_labels, vec![0, 1, 0, 1, 0, 1]);
        assert!((sc.centroids[0][0] - 0.1).abs() < 1e-12);
        let all = supercluster(&m, 6).unwrap();
        assert_eq!(all.neuron_labels, vec![0, 1, 2, 3, 4, 5]);
        assert!(matches!(supercluster(&m, 1), Err(ValidityError::KOutOfRange { .. })));
        assert!(matches!(supercluster(&m, 7), Err(ValidityError::KOutOfRange { .. })));
    }

    #[test]
    fn scan_singleton_range() {
        let m = model(two_groups(), 2, 3);
        let r = scan_k(&m, 4, 4).unwrap();
        assert_eq!(r.chosen_k, 4);
        assert_eq!(r.rows.len(), 1);
        assert!(matches!(scan_k(&m, 3, 2), Err(ValidityError::InvalidRange { .. })));
        assert!(matches!(scan_k(&m, 2, 9), Err(ValidityError::KOutOfRange { .. })));
    }

    #[test]
    fn singleton_dbi_is_an_error_not_a_number() {
        let m = model(two_groups(), 2, 3);
        assert!(matches!(scan_k(&m, 6, 6), Err(ValidityError::AllSingletons)));
    }

    #[test]
    fn report_csv_footer() {
        let r = choose_k(&table3()).unwrap();
        let csv = r.to_csv_string();
        assert!(csv.contains("k,silhouette,dbi\n3,0.4212,0.1721\n"));
        assert!(csv.ends_with("# chosen_k=7\n"));
    }

    #[test]
    fn assignment_follows_bmu() {
        let m = model(two_groups(), 2, 3);
        let sc = supercluster(&m, 2).unwrap();
        let x = FeatureMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["f0".into(), "f1".into()],
            vec![9.0, 9.0, 0.0, 0.1, 1.0, 1.0],
            MatrixKind::RawPercent,
        )
        .unwrap();
        let a = assign_regions(&m, &sc, &x).unwrap();
        assert_eq!(a.regions[0].bmu, 1);
        assert_eq!(a.cluster_of("a"), Some(2));
        assert_eq!(a.cluster_of("b"), Some(1));
        assert_eq!(a.counts().iter().sum::<usize>(), 3);

        // Relabelling clusters permutes the assignment the same way.
        let swapped = SuperClustering {
            k: 2,
            neuron_labels: sc.neuron_labels.iter().map(|l| 1 - l).collect(),
            centroids: vec![sc.centroids[1].clone(), sc.centroids[0].clone()],
        };
        let b = assign_regions(&m, &swapped, &x).unwrap();
        for (ra, rb) in a.regions.iter().zip(&b.regions) {
            assert_eq!(rb.cluster, 3 - ra.cluster);
        }

        let p = Path::new("assign.csv");
        let back = ClusterAssignment::from_csv_str(p, &a.to_csv_string()).unwrap();
        assert_eq!(back, a);
    }
}
