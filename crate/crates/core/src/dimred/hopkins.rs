use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DimredError;
use crate::ingest::FeatureMatrix;

const MIN_ROWS: usize = 10;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Hopkins clustering-tendency statistic.
///
/// Draws `ceil(fraction * n)` real rows without replacement and the same
/// number of points uniformly from the per-dimension bounding box. With `u`
/// the synthetic-to-nearest-real distances and `w` the sampled-real to
/// nearest-other-real distances, returns `sum(u) / (sum(u) + sum(w))`.
/// Around 0.5 for spatially random data, towards 1 for clustered data.
pub fn hopkins(x: &FeatureMatrix, sample_fraction: f64, seed: u64) -> Result<f64, DimredError> {
    if !(sample_fraction > 0.0 && sample_fraction < 1.0) {
        return Err(DimredError::FractionOutOfRange(sample_fraction));
    }
    let n = x.n_rows();
    if n < MIN_ROWS {
        return Err(DimredError::TooFewRows { n, min: MIN_ROWS });
    }
    let d = x.n_features();
    let size = ((sample_fraction * n as f64).ceil() as usize).clamp(1, n - 1);

    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in x.rows() {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = rand::seq::index::sample(&mut rng, n, size).into_vec();
    let mut probe = vec![0.0; d];
    let mut u_sum = 0.0;
    for _ in 0..size {
        for j in 0..d {
            probe[j] = if hi[j] > lo[j] {
                rng.random_range(lo[j]..hi[j])
            } else {
                lo[j]
            };
        }
        u_sum += x
            .rows()
            .map(|r| dist(&probe, r))
            .fold(f64::INFINITY, f64::min);
    }
    let w_sum: f64 = sample
        .iter()
        .map(|&i| {
            let xi = x.row(i);
            (0..n)
                .filter(|&k| k != i)
                .map(|k| dist(xi, x.row(k)))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let total = u_sum + w_sum;
    Ok(if total > 0.0 { u_sum / total } else { 0.5 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimred::kpca::matrix_from_rows;

    fn uniform(seed: u64, n: usize, d: usize) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        matrix_from_rows(&rows)
    }

    #[test]
    fn deterministic_per_seed() {
        let x = uniform(1, 60, 3);
        assert_eq!(hopkins(&x, 0.1, 9).unwrap(), hopkins(&x, 0.1, 9).unwrap());
        assert_ne!(hopkins(&x, 0.1, 9).unwrap(), hopkins(&x, 0.1, 10).unwrap());
    }

    #[test]
    fn argument_checks() {
        let x = uniform(1, 60, 3);
        assert!(matches!(hopkins(&x, 0.0, 1), Err(DimredError::FractionOutOfRange(_))));
        assert!(matches!(hopkins(&x, 1.0, 1), Err(DimredError::FractionOutOfRange(_))));
        let small = uniform(1, 9, 2);
        assert!(matches!(hopkins(&small, 0.5, 1), Err(DimredError::TooFewRows { n: 9, .. })));
    }

    #[test]
    fn value_in_unit_interval() {
        let x = uniform(3, 40, 2);
        let h = hopkins(&x, 0.25, 4).unwrap();
        assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn row_permutation_leaves_distribution_unchanged() {
        let x = uniform(21, 200, 4);
        let mut rows: Vec<Vec<f64>> = x.rows().map(<[f64]>::to_vec).collect();
        rows.reverse();
        let y = matrix_from_rows(&rows);
        let mean = |m: &FeatureMatrix| (0..20).map(|s| hopkins(m, 0.1, s).unwrap()).sum::<f64>() / 20.0;
        assert!((mean(&x) - mean(&y)).abs() < 0.05);
    }
}
