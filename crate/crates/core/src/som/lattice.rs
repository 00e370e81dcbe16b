use serde::{Deserialize, Serialize};

/// `rows x cols` integer grid; neuron `i` sits at `(i / cols, i % cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub rows: usize,
    pub cols: usize,
}

impl Lattice {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, neuron: usize) -> (usize, usize) {
        (neuron / self.cols, neuron % self.cols)
    }

    pub fn positions(&self) -> Vec<(usize, usize)> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }

    /// Euclidean distance between two neurons in lattice units.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.position(a);
        let (rb, cb) = self.position(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        (dr * dr + dc * dc).sqrt()
    }

    /// True when the neurons touch in the 8-neighbourhood.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (ra, ca) = self.position(a);
        let (rb, cb) = self.position(b);
        a != b && ra.abs_diff(rb) <= 1 && ca.abs_diff(cb) <= 1
    }
}
