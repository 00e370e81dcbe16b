use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::kernel::{center_gram, kernel_matrix, CenteringStats, KernelSpec};
use super::{DimredError, RANK_TOLERANCE};
use crate::artifact;
use crate::ingest::FeatureMatrix;

/// Fitted kernel PCA.
///
/// `eigenvalues` are eigenvalues of the centered Gram matrix (not divided by
/// n), descending and clamped at zero. Each row of `coefficients` is the
/// matching eigenvector scaled by `1/sqrt(eigenvalue)`, so the component has
/// unit norm in feature space: `a' Kc a = 1`. Components whose eigenvalue is
/// numerically zero get all-zero coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub spec: KernelSpec,
    pub row_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub training_rows: Vec<Vec<f64>>,
    pub centering: CenteringStats,
    pub eigenvalues: Vec<f64>,
    /// Full centered-kernel spectrum, used for variance fractions.
    pub spectrum: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub k: usize,
}

impl KernelModel {
    pub fn save(&self, path: &Path) -> Result<(), DimredError> {
        Ok(artifact::write_json(path, self)?)
    }

    pub fn load(path: &Path) -> Result<Self, DimredError> {
        Ok(artifact::read_json(path)?)
    }

    /// Number of eigenvalues above the relative rank tolerance.
    pub fn rank(&self) -> usize {
        let max = self.spectrum.first().copied().unwrap_or(0.0);
        self.spectrum
            .iter()
            .filter(|&&l| l > RANK_TOLERANCE * max && l > 0.0)
            .count()
    }
}

pub fn fit_kpca(x: &FeatureMatrix, spec: &KernelSpec, k: usize) -> Result<KernelModel, DimredError> {
    let n = x.n_rows();
    if k == 0 || k > n - 1 {
        return Err(DimredError::TooManyComponents { k, n, max: n - 1 });
    }
    let gram = kernel_matrix(x, spec)?;
    let centered = center_gram(&gram);
    let eig = SymmetricEigen::new(centered.matrix.clone());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    if spectrum.iter().any(|v| !v.is_finite()) {
        return Err(DimredError::NonFiniteKernel);
    }
    let top = spectrum[0];

    let mut coefficients = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let lambda = spectrum[c];
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        // Sign convention: largest-magnitude entry positive.
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        if lambda > RANK_TOLERANCE * top && lambda > 0.0 {
            let scale = 1.0 / lambda.sqrt();
            v.iter_mut().for_each(|e| *e *= scale);
        } else {
            v.iter_mut().for_each(|e| *e = 0.0);
        }
        coefficients.push(v);
    }

    Ok(KernelModel {
        spec: *spec,
        row_ids: x.row_ids().to_vec(),
        feature_names: x.feature_names().to_vec(),
        training_rows: x.rows().map(<[f64]>::to_vec).collect(),
        centering: centered.stats,
        eigenvalues: spectrum[..k].to_vec(),
        spectrum,
        coefficients,
        k,
    })
}

/// Kernel principal component scores of new rows (`n_new x k`).
pub fn project(model: &KernelModel, x_new: &FeatureMatrix) -> Result<DMatrix<f64>, DimredError> {
    if x_new.feature_names() != model.feature_names.as_slice() {
        return Err(DimredError::ColumnMismatch(format!(
            "expected {:?}, got {:?}",
            model.feature_names,
            x_new.feature_names()
        )));
    }
    let mut scores = DMatrix::zeros(x_new.n_rows(), model.k);
    for (i, row) in x_new.rows().enumerate() {
        let k_row: Vec<f64> = model
            .training_rows
            .iter()
            .map(|t| model.spec.eval(row, t))
            .collect();
        let centered = model.centering.center_row(&k_row);
        for (c, coef) in model.coefficients.iter().enumerate() {
            scores[(i, c)] = coef.iter().zip(&centered).map(|(a, b)| a * b).sum();
        }
    }
    Ok(scores)
}

/// Share of the total centered-kernel spectrum carried by each retained component.
pub fn explained_variance_fractions(model: &KernelModel) -> Result<Vec<f64>, DimredError> {
    let total: f64 = model.spectrum.iter().sum();
    if total <= 0.0 {
        return Err(DimredError::AllEigenvaluesZero);
    }
    Ok(model.eigenvalues.iter().map(|l| l / total).collect())
}

/// Per-row weights: Euclidean norm of the row's kernel PCA scores, rescaled to
/// mean 1. Rows sitting exactly at the feature-space center get a small
/// positive floor so every weight stays positive.
pub fn leverage_weights(scores: &DMatrix<f64>) -> Vec<f64> {
    let norms: Vec<f64> = scores.row_iter().map(|r| r.norm()).collect();
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    if mean <= 0.0 {
        return vec![1.0; norms.len()];
    }
    norms.iter().map(|v| (v / mean).max(1e-9)).collect()
}

#[cfg(test)]
pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> FeatureMatrix {
    let m = rows[0].len();
    FeatureMatrix::new(
        (0..rows.len()).map(|i| format!("r{i}")).collect(),
        (0..m).map(|j| format!("f{j}")).collect(),
        rows.concat(),
        crate::ingest::MatrixKind::RawPercent,
    )
    .expect("valid matrix")
}
