use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quantization_error, Lattice, SomConfig, SomError, SomModel};
use crate::ingest::FeatureMatrix;

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gaussian neighbourhood `exp(-d^2 / (2 sigma^2))` of lattice distance `d`.
/// The BMU itself always gets 1, even once `sigma` has underflowed.
pub fn neighborhood(distance: f64, sigma: f64) -> f64 {
    if distance == 0.0 {
        return 1.0;
    }
    (-(distance * distance) / (2.0 * sigma * sigma)).exp()
}

/// `initial * exp(-n / tau)`.
pub fn decay(initial: f64, n: f64, tau: f64) -> f64 {
    initial * (-n / tau).exp()
}

/// Moves `w` towards `x` by `theta * lambda * (x - w)`.
#[inline]
pub fn update_weights(w: &mut [f64], x: &[f64], theta: f64, lambda: f64) {
    let rate = theta * lambda;
    for (wi, xi) in w.iter_mut().zip(x) {
        *wi += rate * (xi - *wi);
    }
}

/// Hebbian growth minus a forgetting term, with the neuron output equal to
/// the neighbourhood value and the forgetting rate equal to the learning
/// rate: `theta * y * x - beta * y * w`.
pub fn hebbian_forgetting_delta(w: f64, x: f64, theta: f64, lambda: f64) -> f64 {
    let y = lambda;
    let beta = theta;
    theta * y * x - beta * y * w
}

/// Index of the neuron nearest to `x`; ties go to the lowest index.
pub fn bmu(x: &[f64], model: &SomModel) -> Result<usize, SomError> {
    if x.len() != model.dim() {
        return Err(SomError::DimensionMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    Ok(nearest(x, &model.weights))
}

pub(crate) fn nearest(x: &[f64], weights: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, w) in weights.iter().enumerate() {
        let d = sq_dist(x, w);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn init_with_rng(x: &FeatureMatrix, config: &SomConfig, rng: &mut ChaCha8Rng) -> Result<SomModel, SomError> {
    if x.n_rows() == 0 || x.n_features() == 0 {
        return Err(SomError::EmptyInput);
    }
    config.check_trainable()?;
    let lattice = Lattice::new(config.rows, config.cols);
    if lattice.len() > 2 * x.n_rows() {
        log::warn!(
            "{} neurons for {} observations; many neurons will stay empty",
            lattice.len(),
            x.n_rows()
        );
    }
    let weights = (0..lattice.len())
        .map(|_| x.row(rng.random_range(0..x.n_rows())).to_vec())
        .collect();
    Ok(SomModel {
        lattice,
        feature_names: x.feature_names().to_vec(),
        weights,
        config: config.clone(),
        history: Vec::new(),
    })
}

/// Initialises every neuron with a training row drawn uniformly with replacement.
pub fn init_model(x: &FeatureMatrix, config: &SomConfig) -> Result<SomModel, SomError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_with_rng(x, config, &mut rng)
}

/// Online training.
///
/// Rows are presented in a fresh seeded shuffle each epoch until
/// `config.iterations` presentations have been made. Only neurons whose
/// lattice distance to the BMU is strictly below the current radius are
/// updated. The quantization error is recorded after every epoch.
pub fn train(x: &FeatureMatrix, config: &SomConfig) -> Result<SomModel, SomError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = init_with_rng(x, config, &mut rng)?;
    let n = x.n_rows();
    let lattice = model.lattice;
    let mut order: Vec<usize> = (0..n).collect();

    let mut t = 0;
    while t < config.iterations {
        order.shuffle(&mut rng);
        for &row in &order {
            if t == config.iterations {
                break;
            }
            let sigma = config.radius_at(t);
            let theta = config.learning_rate_at(t);
            let xi = x.row(row);
            let winner = nearest(xi, &model.weights);
            for (j, w) in model.weights.iter_mut().enumerate() {
                let d = lattice.distance(winner, j);
                if d < sigma {
                    update_weights(w, xi, theta, neighborhood(d, sigma));
                    if w.iter().any(|v| !v.is_finite()) {
                        return Err(SomError::NonFinite {
                            presentation: t,
                            neuron: j,
                        });
                    }
                }
            }
            t += 1;
        }
        model.history.push(quantization_error(x, &model)?);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::ingest::MatrixKind;
    use proptest::prelude::*;

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::new(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            (0..rows[0].len()).map(|j| format!("f{j}")).collect(),
            rows.concat(),
            MatrixKind::RawPercent,
        )
        .unwrap()
    }

    fn random_rows(seed: u64, n: usize, m: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    fn model_with(weights: Vec<Vec<f64>>, rows: usize, cols: usize) -> SomModel {
        let m = weights[0].len();
        SomModel {
            lattice: Lattice::new(rows, cols),
            feature_names: (0..m).map(|j| format!("f{j}")).collect(),
            weights,
            config: SomConfig::new(rows, cols, 1.0, 0.5, 1, 0),
            history: vec![],
        }
    }

    #[test]
    fn neighborhood_values() {
        assert_eq!(neighborhood(0.0, 2.0), 1.0);
        let sigma = 1.7;
        let d = (2.0f64).sqrt() * sigma;
        assert!((neighborhood(d, sigma) - (-1.0f64).exp()).abs() < 1e-15);
        for s in [0.3, 1.0, 4.0] {
            assert!(neighborhood(2.0, s) < neighborhood(1.0, s));
        }
    }

    #[test]
    fn long_runs_survive_radius_underflow() {
        assert_eq!(neighborhood(0.0, 1e-300), 1.0);
        assert_eq!(neighborhood(1.0, 1e-300), 0.0);
        let x = matrix(&random_rows(4, 20, 3));
        let mut c = SomConfig::new(3, 3, 2.0, 0.5, 4000, 1);
        c.time_constant = 2.0;
        let m = train(&x, &c).unwrap();
        assert!(m.weights.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn decay_values() {
        assert_eq!(decay(5.0, 0.0, 12.0), 5.0);
        assert!((decay(5.0, 12.0, 12.0) - 5.0 * (-1.0f64).exp()).abs() < 1e-15);
        let seq: Vec<f64> = (0..=10).map(|n| decay(0.57, n as f64, 3.0)).collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]));

        let c = SomConfig::new(10, 10, 5.0, 0.57, 1000, 0);
        let g = c.time_constant;
        assert!((g - 1000.0 / 5f64.ln()).abs() < 1e-9);
        assert!((c.radius_at(1000) - 1.0).abs() < 1e-9);
        assert!((c.learning_rate_at(1000) - 0.57 * (-1000.0 / (g * g)).exp()).abs() < 1e-15);
    }

    #[test]
    fn bmu_rules() {
        let mut weights = random_rows(3, 12, 4);
        let model = model_with(weights.clone(), 3, 4);
        assert_eq!(bmu(&weights[7], &model).unwrap(), 7);

        weights[3] = vec![1.0, 0.0, 0.0, 0.0];
        weights[9] = vec![-1.0, 0.0, 0.0, 0.0];
        for (j, w) in weights.iter_mut().enumerate() {
            if j != 3 && j != 9 {
                w[0] = 100.0;
            }
        }
        let model = model_with(weights, 3, 4);
        assert_eq!(bmu(&[0.0; 4], &model).unwrap(), 3);
        assert!(matches!(
            bmu(&[0.0; 3], &model),
            Err(SomError::DimensionMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn bmu_matches_exhaustive_scan() {
        let model = model_with(random_rows(8, 12, 3), 3, 4);
        for x in random_rows(9, 50, 3) {
            let dists: Vec<f64> = model
                .weights
                .iter()
                .map(|w| x.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .collect();
            let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
            let oracle = dists.iter().position(|&d| d == min).unwrap();
            assert_eq!(bmu(&x, &model).unwrap(), oracle);
        }
    }

    #[test]
    fn init_is_seeded_sampling() {
        let rows = random_rows(1, 30, 3);
        let x = matrix(&rows);
        let c = SomConfig::new(4, 5, 2.0, 0.57, 100, 42);
        let a = init_model(&x, &c).unwrap();
        let b = init_model(&x, &c).unwrap();
        assert_eq!(a.weights, b.weights);
        assert!(a.weights.iter().all(|w| rows.contains(w)));
        let other = init_model(&x, &SomConfig { seed: 43, ..c }).unwrap();
        assert_ne!(a.weights, other.weights);
    }

    #[test]
    fn full_size_lattice() {
        let c = SomConfig::new(super::super::DEFAULT_ROWS, super::super::DEFAULT_COLS, 9.0, 0.57, 1000, 0);
        assert_eq!(c.neurons(), 270);
        assert!(c.validate().is_ok());
        let rows = random_rows(2, 322, 4);
        let m = init_model(&matrix(&rows), &c).unwrap();
        assert_eq!(m.weights.len(), 270);
    }

    #[test]
    fn full_pull_with_unit_rate() {
        let x = matrix(&[vec![3.0, -1.0], vec![3.0, -1.0]]);
        let mut c = SomConfig::new(1, 1, 1.0, 1.0, 1, 0);
        c.time_constant = 1e12;
        let m = train(&x, &c).unwrap();
        assert_eq!(m.weights[0], vec![3.0, -1.0]);

        // Single observation, single neuron: starts elsewhere, one step lands on it.
        let mut model = model_with(vec![vec![10.0, 10.0]], 1, 1);
        update_weights(&mut model.weights[0], &[3.0, -1.0], 1.0, neighborhood(0.0, 5.0));
        assert_eq!(model.weights[0], vec![3.0, -1.0]);
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let x = matrix(&random_rows(4, 20, 3));
        let c = SomConfig::new(3, 3, 2.0, 0.0, 200, 7);
        let init = init_model(&x, &c).unwrap();
        let trained = train(&x, &c).unwrap();
        assert_eq!(init.weights, trained.weights);
        assert!(c.validate().is_err());
    }

    #[test]
    fn history_has_one_entry_per_epoch() {
        let x = matrix(&random_rows(5, 20, 2));
        let c = SomConfig::new(3, 3, 2.0, 0.5, 50, 1);
        let m = train(&x, &c).unwrap();
        assert_eq!(m.history.len(), 3);
    }

    #[test]
    fn small_radius_moves_only_the_bmu() {
        let x = matrix(&random_rows(6, 10, 2));
        let c = SomConfig::new(3, 3, 0.9, 0.5, 1, 3);
        let init = init_model(&x, &c).unwrap();
        let trained = train(&x, &c).unwrap();
        let changed = init
            .weights
            .iter()
            .zip(&trained.weights)
            .filter(|(a, b)| a != b)
            .count();
        assert!(changed <= 1);
    }

    #[test]
    fn rejects_invalid_config() {
        let x = matrix(&random_rows(6, 10, 2));
        let c = SomConfig::new(0, 3, 1.0, 0.5, 10, 0);
        assert!(matches!(train(&x, &c), Err(SomError::InvalidConfig(_))));
        let c = SomConfig::new(3, 3, 1.0, 0.5, 0, 0);
        assert!(matches!(train(&x, &c), Err(SomError::InvalidConfig(_))));
    }

    #[test]
    fn model_json_roundtrip() {
        let x = matrix(&random_rows(5, 20, 2));
        let m = train(&x, &SomConfig::new(3, 3, 2.0, 0.5, 40, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("som.json");
        m.save(&p).unwrap();
        assert_eq!(SomModel::load(&p).unwrap(), m);
    }

    proptest! {
        #[test]
        fn update_equals_hebb_minus_forgetting(
            w in -10.0f64..10.0, x in -10.0f64..10.0, theta in 0.0f64..1.0, lambda in 0.0f64..1.0
        ) {
            let mut ww = [w];
            update_weights(&mut ww, &[x], theta, lambda);
            let delta = hebbian_forgetting_delta(w, x, theta, lambda);
            prop_assert!((ww[0] - (w + delta)).abs() < 1e-12);
        }

        #[test]
        fn trained_weights_stay_in_data_box(seed in 0u64..200) {
            let rows = random_rows(seed, 25, 3);
            let x = matrix(&rows);
            let m = train(&x, &SomConfig::new(4, 4, 3.0, 0.57, 150, seed)).unwrap();
            for j in 0..3 {
                let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                for w in &m.weights {
                    prop_assert!(w[j] >= lo - 1e-9 && w[j] <= hi + 1e-9);
                }
            }
        }

        #[test]
        fn training_is_deterministic(seed in 0u64..50) {
            let x = matrix(&random_rows(seed, 15, 2));
            let c = SomConfig::new(3, 3, 2.0, 0.57, 60, seed);
            let a = train(&x, &c).unwrap();
            let b = train(&x, &c).unwrap();
            prop_assert_eq!(a.to_json(), b.to_json());
        }
    }
}
