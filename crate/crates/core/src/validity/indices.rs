use std::collections::BTreeMap;

use super::{euclid, ValidityError};

/// Davies-Bouldin index.
///
/// `delta_m` is the mean Euclidean distance of cluster `m`'s members to its
/// centroid and `Delta_ij` the distance between centroids; the index is the
/// mean over clusters of `max_{j != i} (delta_i + delta_j) / Delta_ij`.
/// Lower is better.
pub fn dbi(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> Result<f64, ValidityError> {
    if points.len() != labels.len() {
        return Err(ValidityError::LabelMismatch {
            points: points.len(),
            labels: labels.len(),
        });
    }
    let p = centroids.len();
    if p < 2 {
        return Err(ValidityError::TooFewClusters(p));
    }
    let mut spread = vec![0.0; p];
    let mut count = vec![0usize; p];
    for (x, &l) in points.iter().zip(labels) {
        if l >= p {
            return Err(ValidityError::KOutOfRange {
                k: l,
                min: 0,
                max: p - 1,
            });
        }
        spread[l] += euclid(x, &centroids[l]);
        count[l] += 1;
    }
    if let Some(empty) = count.iter().position(|&c| c == 0) {
        return Err(ValidityError::EmptyCluster(empty));
    }
    if count.iter().all(|&c| c == 1) {
        return Err(ValidityError::AllSingletons);
    }
    let delta: Vec<f64> = spread.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let mut total = 0.0;
    for i in 0..p {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..p {
            if i == j {
                continue;
            }
            let sep = euclid(&centroids[i], &centroids[j]);
            if sep == 0.0 {
                return Err(ValidityError::CoincidentCentroids(i.min(j), i.max(j)));
            }
            worst = worst.max((delta[i] + delta[j]) / sep);
        }
        total += worst;
    }
    Ok(total / p as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub values: Vec<f64>,
    pub mean: f64,
}

/// Silhouette `(beta - alpha) / max(alpha, beta)` per point, where `alpha`
/// is the mean distance to the rest of the point's own cluster and `beta`
/// the smallest mean distance to another cluster. Points in singleton
/// clusters score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<Silhouette, ValidityError> {
    if points.len() != labels.len() {
        return Err(ValidityError::LabelMismatch {
            points: points.len(),
            labels: labels.len(),
        });
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_default() += 1;
    }
    if sizes.len() < 2 {
        return Err(ValidityError::TooFewClusters(sizes.len()));
    }
    let slot: BTreeMap<usize, usize> = sizes.keys().enumerate().map(|(i, &l)| (l, i)).collect();
    let size: Vec<usize> = sizes.values().copied().collect();

    let n = points.len();
    let mut values = Vec::with_capacity(n);
    let mut sums = vec![0.0; size.len()];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[slot[&labels[j]]] += euclid(&points[i], &points[j]);
            }
        }
        let own = slot[&labels[i]];
        if size[own] == 1 {
            values.push(0.0);
            continue;
        }
        let alpha = sums[own] / (size[own] - 1) as f64;
        let beta = (0..size.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / size[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = alpha.max(beta);
        values.push(if denom > 0.0 { (beta - alpha) / denom } else { 0.0 });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { values, mean })
}
