//! Rectangular self-organizing map.
//!
//! Neurons sit on an integer grid. Training is online: each presented row
//! pulls its best matching unit (BMU) and every neuron closer than the
//! current radius towards it, weighted by a Gaussian of lattice distance.
//! Radius and learning rate decay exponentially with the presentation index.

mod lattice;
mod metrics;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};
use crate::error::ErrorClass;

pub use lattice::Lattice;
pub use metrics::{quantization_error, second_bmu, topographic_error, total_distortion};
pub use train::{
    bmu, decay, hebbian_forgetting_delta, init_model, neighborhood, train, update_weights,
};

/// Initial learning rate used by default.
pub const DEFAULT_THETA0: f64 = 0.57;
pub const DEFAULT_ROWS: usize = 18;
pub const DEFAULT_COLS: usize = 15;

#[derive(Debug, Error)]
pub enum SomError {
    #[error("training matrix is empty")]
    EmptyInput,
    #[error("dimension mismatch: model has {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid SOM configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite weight for neuron {neuron} at presentation {presentation}")]
    NonFinite { presentation: usize, neuron: usize },
    #[error("need at least two neurons, got {0}")]
    TooFewNeurons(usize),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl SomError {
    pub fn class(&self) -> ErrorClass {
        match self {
            SomError::NonFinite { .. } => ErrorClass::Numerical,
            SomError::Artifact(_) | SomError::EmptyInput => ErrorClass::Data,
            _ => ErrorClass::Validation,
        }
    }
}

/// Lattice shape and training schedule.
///
/// The neighbourhood radius decays as `sigma0 * exp(-n / G)` and the learning
/// rate as `theta0 * exp(-n / G^2)`, where `n` counts presentations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub sigma0: f64,
    pub theta0: f64,
    pub time_constant: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl SomConfig {
    /// Config with the default time constant `G = iterations / ln(sigma0)`,
    /// which brings the radius down to about 1 by the last presentation.
    pub fn new(rows: usize, cols: usize, sigma0: f64, theta0: f64, iterations: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            sigma0,
            theta0,
            time_constant: default_time_constant(sigma0, iterations),
            iterations,
            seed,
        }
    }

    pub fn neurons(&self) -> usize {
        self.rows * self.cols
    }

    /// Strict check used before running a pipeline:
    /// `0 < theta0 < 1` and `sigma0 <= max(rows, cols)`.
    pub fn validate(&self) -> Result<(), SomError> {
        self.check_trainable()?;
        if !(self.theta0 > 0.0 && self.theta0 < 1.0) {
            return Err(SomError::InvalidConfig(format!(
                "theta0 must lie in (0, 1), got {}",
                self.theta0
            )));
        }
        if self.sigma0 > self.rows.max(self.cols) as f64 {
            return Err(SomError::InvalidConfig(format!(
                "sigma0 {} exceeds the lattice extent {}",
                self.sigma0,
                self.rows.max(self.cols)
            )));
        }
        Ok(())
    }

    /// Looser check applied by the trainer itself; allows the boundary
    /// learning rates 0 and 1.
    pub(crate) fn check_trainable(&self) -> Result<(), SomError> {
        let bad = |m: String| Err(SomError::InvalidConfig(m));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!("lattice {}x{} is empty", self.rows, self.cols));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if !(0.0..=1.0).contains(&self.theta0) {
            return bad(format!("theta0 must lie in [0, 1], got {}", self.theta0));
        }
        if !(self.time_constant > 0.0) {
            return bad(format!("time constant must be positive, got {}", self.time_constant));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        Ok(())
    }

    pub fn radius_at(&self, n: usize) -> f64 {
        decay(self.sigma0, n as f64, self.time_constant)
    }

    pub fn learning_rate_at(&self, n: usize) -> f64 {
        decay(self.theta0, n as f64, self.time_constant * self.time_constant)
    }
}

pub fn default_time_constant(sigma0: f64, iterations: usize) -> f64 {
    let ln = sigma0.ln();
    if ln > 0.0 {
        iterations as f64 / ln
    } else {
        iterations as f64
    }
}

/// Trained (or freshly initialised) map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomModel {
    pub lattice: Lattice,
    pub feature_names: Vec<String>,
    /// One weight vector per neuron, row-major over the lattice.
    pub weights: Vec<Vec<f64>>,
    pub config: SomConfig,
    /// Quantization error after each training epoch.
    pub history: Vec<f64>,
}

impl SomModel {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn neurons(&self) -> usize {
        self.weights.len()
    }

    pub fn to_json(&self) -> String {
        artifact::to_versioned_json(self)
    }

    pub fn save(&self, path: &Path) -> Result<(), SomError> {
        Ok(artifact::write_json(path, self)?)
    }

    pub fn load(path: &Path) -> Result<Self, SomError> {
        let model: SomModel = artifact::read_json(path)?;
        let m = model.dim();
        if model.weights.len() != model.lattice.len()
            || model.weights.iter().any(|w| w.len() != m)
        {
            return Err(SomError::InvalidConfig(format!(
                "{}: weight matrix does not match the lattice",
                path.display()
            )));
        }
        Ok(model)
    }
}
