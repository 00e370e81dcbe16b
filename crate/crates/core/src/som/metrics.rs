use super::train::nearest;
use super::{SomError, SomModel};
use crate::ingest::FeatureMatrix;

fn check_dims(x: &FeatureMatrix, model: &SomModel) -> Result<(), SomError> {
    if x.n_features() != model.dim() {
        return Err(SomError::DimensionMismatch {
            expected: model.dim(),
            found: x.n_features(),
        });
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean Euclidean (not squared) distance from each row to its BMU.
pub fn quantization_error(x: &FeatureMatrix, model: &SomModel) -> Result<f64, SomError> {
    check_dims(x, model)?;
    let total: f64 = x
        .rows()
        .map(|r| sq_dist(r, &model.weights[nearest(r, &model.weights)]).sqrt())
        .sum();
    Ok(total / x.n_rows() as f64)
}

/// Sum over neurons of squared distances to the rows in their Voronoi cell.
pub fn total_distortion(x: &FeatureMatrix, model: &SomModel) -> Result<f64, SomError> {
    check_dims(x, model)?;
    let mut per_neuron = vec![0.0; model.neurons()];
    for r in x.rows() {
        let j = nearest(r, &model.weights);
        per_neuron[j] += sq_dist(r, &model.weights[j]);
    }
    Ok(per_neuron.iter().sum())
}

/// First and second nearest neurons; ties go to the lower index.
pub fn second_bmu(x: &[f64], model: &SomModel) -> Result<(usize, usize), SomError> {
    if model.neurons() < 2 {
        return Err(SomError::TooFewNeurons(model.neurons()));
    }
    if x.len() != model.dim() {
        return Err(SomError::DimensionMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    let (mut b1, mut d1) = (usize::MAX, f64::INFINITY);
    let (mut b2, mut d2) = (usize::MAX, f64::INFINITY);
    for (j, w) in model.weights.iter().enumerate() {
        let d = sq_dist(x, w);
        if d < d1 {
            (b2, d2) = (b1, d1);
            (b1, d1) = (j, d);
        } else if d < d2 {
            (b2, d2) = (j, d);
        }
    }
    Ok((b1, b2))
}

/// Share of rows whose two nearest neurons are not 8-neighbours on the lattice.
pub fn topographic_error(x: &FeatureMatrix, model: &SomModel) -> Result<f64, SomError> {
    check_dims(x, model)?;
    let mut errors = 0usize;
    for r in x.rows() {
        let (a, b) = second_bmu(r, model)?;
        if !model.lattice.adjacent(a, b) {
            errors += 1;
        }
    }
    Ok(errors as f64 / x.n_rows() as f64)
}
