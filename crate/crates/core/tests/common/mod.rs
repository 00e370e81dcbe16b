#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use geosom::ingest::{standardize, FeatureMatrix, MatrixKind};
use geosom::pipeline::PipelineConfig;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn mini_census_config(output_dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixtures().join("mini_census/config.json")).unwrap();
    cfg.paths.output_dir = output_dir.to_path_buf();
    cfg
}

/// The committed 3-blob data, z-scored, with its ground-truth labels.
pub fn blobs3() -> (FeatureMatrix, Vec<usize>) {
    let mut reader = csv::Reader::from_path(fixtures().join("blobs3.csv")).unwrap();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        ids.push(rec[0].to_string());
        labels.push(rec[1].parse().unwrap());
        values.extend(rec.iter().skip(2).map(|v| v.parse::<f64>().unwrap()));
    }
    let m = values.len() / ids.len();
    let x = FeatureMatrix::new(
        ids,
        (1..=m).map(|j| format!("x{j}")).collect(),
        values,
        MatrixKind::RawPercent,
    )
    .unwrap();
    (standardize(&x).unwrap().0, labels)
}

pub fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::new(
        (0..rows.len()).map(|i| format!("r{i}")).collect(),
        (0..rows[0].len()).map(|j| format!("f{j}")).collect(),
        rows.concat(),
        MatrixKind::RawPercent,
    )
    .unwrap()
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sa: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sb: f64 = cols.values().map(|&v| choose2(v)).sum();
    let expected = sa * sb / choose2(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// Member means, computed one cluster at a time.
pub fn naive_centroids(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            (0..points[0].len())
                .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                .collect()
        })
        .collect()
}

/// Davies-Bouldin index straight from its definition.
pub fn naive_dbi(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    let k = centroids.len();
    let mut delta = vec![0.0; k];
    for c in 0..k {
        let mut sum = 0.0;
        let mut count = 0;
        for i in 0..points.len() {
            if labels[i] == c {
                sum += dist(&points[i], &centroids[c]);
                count += 1;
            }
        }
        delta[c] = sum / count as f64;
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i != j {
                let r = (delta[i] + delta[j]) / dist(&centroids[i], &centroids[j]);
                if r > worst {
                    worst = r;
                }
            }
        }
        total += worst;
    }
    total / k as f64
}

/// Mean silhouette from pairwise distances; singleton members score 0.
pub fn naive_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist(&points[i], &points[j]);
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if counts[own] == 0 {
            continue;
        }
        let alpha = sums[own] / counts[own] as f64;
        let mut beta = f64::INFINITY;
        for c in 0..k {
            if c != own && counts[c] > 0 {
                beta = beta.min(sums[c] / counts[c] as f64);
            }
        }
        let m = alpha.max(beta);
        if m > 0.0 {
            total += (beta - alpha) / m;
        }
    }
    total / n as f64
}
