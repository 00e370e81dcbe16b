use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::DimredError;
use crate::artifact;
use crate::ingest::FeatureMatrix;

/// Ridge penalty used when an OLS design is singular.
pub const RIDGE_PENALTY: f64 = 1e-8;

/// Weighted variance of every column: `sum w^2 (x - mean)^2 / sum w^2`, where
/// the mean is weighted by `w^2` as well.
pub fn feature_weighted_variance(x: &FeatureMatrix, weights: &[f64]) -> Result<Vec<f64>, DimredError> {
    if weights.len() != x.n_rows() {
        return Err(DimredError::LengthMismatch {
            left: weights.len(),
            right: x.n_rows(),
        });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(DimredError::NonPositiveWeight { index, value });
    }
    let w2: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let total: f64 = w2.iter().sum();
    Ok((0..x.n_features())
        .map(|j| {
            let mean = x.rows().zip(&w2).map(|(r, w)| w * r[j]).sum::<f64>() / total;
            x.rows()
                .zip(&w2)
                .map(|(r, w)| w * (r[j] - mean).powi(2))
                .sum::<f64>()
                / total
        })
        .collect())
}

/// Coefficient of determination of each feature regressed on all others.
#[derive(Debug, Clone, PartialEq)]
pub struct Relevance {
    pub r2: Vec<f64>,
    /// True where the design was singular and the ridge fallback was used.
    pub ridge_fallback: Vec<bool>,
}

/// Regresses every column on the remaining columns (with intercept) by least
/// squares and reports R^2 clamped to `[0, 1]`.
pub fn relevance_r2(x: &FeatureMatrix) -> Relevance {
    let n = x.n_rows();
    let m = x.n_features();
    let centered = DMatrix::from_fn(n, m, |i, j| x.get(i, j));
    let means: Vec<f64> = (0..m).map(|j| centered.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, m, |i, j| centered[(i, j)] - means[j]);

    let mut r2 = Vec::with_capacity(m);
    let mut ridge_fallback = Vec::with_capacity(m);
    for j in 0..m {
        let y = centered.column(j).into_owned();
        let sst = y.norm_squared();
        if m == 1 || sst == 0.0 {
            r2.push(0.0);
            ridge_fallback.push(false);
            continue;
        }
        let others: Vec<usize> = (0..m).filter(|&c| c != j).collect();
        let z = centered.select_columns(&others);
        let gram = z.transpose() * &z;
        let rhs = z.transpose() * &y;
        let (beta, ridge) = solve_normal_equations(gram, rhs, n);
        let resid = &y - &z * beta;
        let value = 1.0 - resid.norm_squared() / sst;
        r2.push(value.clamp(0.0, 1.0));
        ridge_fallback.push(ridge);
    }
    Relevance { r2, ridge_fallback }
}

fn solve_normal_equations(gram: DMatrix<f64>, rhs: DVector<f64>, n: usize) -> (DVector<f64>, bool) {
    let p = gram.nrows();
    // One degree of freedom goes to the intercept.
    let underdetermined = n <= p + 1;
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !underdetermined && min > super::RANK_TOLERANCE * max {
        if let Some(chol) = gram.cholesky() {
            return (chol.solve(&rhs), false);
        }
    }
    let coords = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_iterator(
        p,
        coords
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, l)| c / (l.max(0.0) + RIDGE_PENALTY)),
    );
    (&eig.eigenvectors * scaled, true)
}

/// Everything the selection rule looks at, aligned by feature.
#[derive(Debug, Clone)]
pub struct ScreeningInputs {
    pub names: Vec<String>,
    pub weighted_variance: Vec<f64>,
    pub relevance: Relevance,
    /// Explained-variance fractions of the retained kernel components.
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub weighted_variance: f64,
    pub r2_relevance: f64,
    pub ridge_fallback: bool,
    pub score: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScoreReport {
    /// In original feature order.
    pub features: Vec<FeatureScore>,
    pub explained_variance: Vec<f64>,
}

impl FeatureScoreReport {
    /// Names of the selected features, best first.
    pub fn selected_names(&self) -> Vec<String> {
        let mut sel: Vec<&FeatureScore> = self.features.iter().filter(|f| f.selected).collect();
        sel.sort_by_key(|f| f.rank);
        sel.into_iter().map(|f| f.name.clone()).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = artifact::csv_header(&[]);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "feature",
            "weighted_variance",
            "r2_relevance",
            "ridge_fallback",
            "score",
            "rank",
            "selected",
        ])
        .expect("in-memory csv");
        for f in &self.features {
            w.write_record([
                f.name.clone(),
                f.weighted_variance.to_string(),
                f.r2_relevance.to_string(),
                f.ridge_fallback.to_string(),
                f.score.to_string(),
                f.rank.to_string(),
                f.selected.to_string(),
            ])
            .expect("in-memory csv");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DimredError> {
        Ok(artifact::write_bytes(path, self.to_csv_string().as_bytes())?)
    }
}

/// Ranks features by `0.5 * minmax(weighted variance) + 0.5 * (1 - R^2)`,
/// favouring spread and penalising redundancy, and marks the top `count`.
/// Equal scores are ordered by feature name.
pub fn select_features(inputs: &ScreeningInputs, count: usize) -> Result<FeatureScoreReport, DimredError> {
    let m = inputs.names.len();
    if inputs.weighted_variance.len() != m || inputs.relevance.r2.len() != m {
        return Err(DimredError::LengthMismatch {
            left: m,
            right: inputs.weighted_variance.len().min(inputs.relevance.r2.len()),
        });
    }
    if count == 0 || count > m {
        return Err(DimredError::CountOutOfRange { count, max: m });
    }
    let lo = inputs.weighted_variance.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inputs
        .weighted_variance
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let scores: Vec<f64> = (0..m)
        .map(|j| {
            let v = if spread > 0.0 {
                (inputs.weighted_variance[j] - lo) / spread
            } else {
                0.0
            };
            0.5 * v + 0.5 * (1.0 - inputs.relevance.r2[j])
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| inputs.names[a].cmp(&inputs.names[b]))
    });
    let mut rank = vec![0; m];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos + 1;
    }
    let features = (0..m)
        .map(|j| FeatureScore {
            name: inputs.names[j].clone(),
            weighted_variance: inputs.weighted_variance[j],
            r2_relevance: inputs.relevance.r2[j],
            ridge_fallback: inputs.relevance.ridge_fallback[j],
            score: scores[j],
            rank: rank[j],
            selected: rank[j] <= count,
        })
        .collect();
    Ok(FeatureScoreReport {
        features,
        explained_variance: inputs.fractions.clone(),
    })
}
