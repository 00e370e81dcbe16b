use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DimredError;
use crate::ingest::FeatureMatrix;

/// Positive semidefinite kernel on feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-|xi - xj|^2 / (2 sigma^2))`, sigma in feature-space units.
    Gaussian { sigma: f64 },
    /// Plain dot product.
    Linear,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self, DimredError> {
        let spec = KernelSpec::Gaussian { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DimredError> {
        match *self {
            KernelSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(DimredError::InvalidSigma(sigma))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub(crate) fn eval(&self, xi: &[f64], xj: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Linear => xi.iter().zip(xj).map(|(a, b)| a * b).sum(),
        }
    }
}

pub fn kernel_value(xi: &[f64], xj: &[f64], spec: &KernelSpec) -> Result<f64, DimredError> {
    if xi.len() != xj.len() {
        return Err(DimredError::LengthMismatch {
            left: xi.len(),
            right: xj.len(),
        });
    }
    spec.validate()?;
    Ok(spec.eval(xi, xj))
}

/// Uncentered `n x n` Gram matrix.
pub fn kernel_matrix(x: &FeatureMatrix, spec: &KernelSpec) -> Result<DMatrix<f64>, DimredError> {
    spec.validate()?;
    let n = x.n_rows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(DimredError::NonFiniteKernel);
    }
    Ok(k)
}

/// Statistics of the training Gram matrix needed to center new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringStats {
    pub row_means: Vec<f64>,
    pub grand_mean: f64,
}

impl CenteringStats {
    pub fn from_kernel(k: &DMatrix<f64>) -> Self {
        let n = k.nrows();
        let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
        let grand_mean = row_means.iter().sum::<f64>() / n as f64;
        Self {
            row_means,
            grand_mean,
        }
    }

    /// Centers one row of kernel values against the training rows.
    pub fn center_row(&self, k_row: &[f64]) -> Vec<f64> {
        let mean = k_row.iter().sum::<f64>() / k_row.len() as f64;
        k_row
            .iter()
            .zip(&self.row_means)
            .map(|(v, r)| v - mean - r + self.grand_mean)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CenteredKernel {
    pub matrix: DMatrix<f64>,
    pub stats: CenteringStats,
}

/// Double-centers the Gram matrix, which is the same as centering the
/// implicit feature map: `Kc = K - 1K/n - K1/n + 1K1/n^2`.
pub fn build_centered_kernel(
    x: &FeatureMatrix,
    spec: &KernelSpec,
) -> Result<CenteredKernel, DimredError> {
    let k = kernel_matrix(x, spec)?;
    Ok(center_gram(&k))
}

pub(crate) fn center_gram(k: &DMatrix<f64>) -> CenteredKernel {
    let stats = CenteringStats::from_kernel(k);
    let n = k.nrows();
    let r = &stats.row_means;
    let g = stats.grand_mean;
    let matrix = DMatrix::from_fn(n, n, |i, j| k[(i, j)] - r[i] - r[j] + g);
    CenteredKernel { matrix, stats }
}

/// Median Euclidean distance over all row pairs; the default Gaussian bandwidth.
pub fn median_pairwise_distance(x: &FeatureMatrix) -> Result<f64, DimredError> {
    let n = x.n_rows();
    let mut d: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.push(d2.sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if median > 0.0 {
        Ok(median)
    } else {
        Err(DimredError::InvalidSigma(median))
    }
}
