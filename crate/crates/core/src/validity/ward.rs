/// One agglomeration step: the cluster in slot `absorbed` joins slot `into`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub into: usize,
    pub absorbed: usize,
    /// Ward dissimilarity (twice the increase in within-cluster sum of squares).
    pub dissimilarity: f64,
}

/// Full merge sequence over `n` points. Slots are point indices; a merged
/// cluster keeps the smaller slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Flat labels for `k` clusters, numbered by first appearance.
    pub fn cut(&self, k: usize) -> Vec<usize> {
        assert!(k >= 1 && k <= self.n, "cut size {k} outside 1..={}", self.n);
        let mut slot: Vec<usize> = (0..self.n).collect();
        for m in &self.merges[..self.n - k] {
            for s in slot.iter_mut() {
                if *s == m.absorbed {
                    *s = m.into;
                }
            }
        }
        canonical_labels(&slot)
    }
}

pub(crate) fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    raw.iter()
        .map(|r| {
            let next = map.len();
            *map.entry(*r).or_insert(next)
        })
        .collect()
}

/// Ward-linkage agglomerative clustering with Lance-Williams updates on
/// squared Euclidean distances. The closest pair is merged at each step;
/// ties go to the lexicographically smallest slot pair.
pub fn ward_linkage(points: &[Vec<f64>]) -> Dendrogram {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for _ in 1..n {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && d[i * n + j] < best.2 {
                    best = (i, j, d[i * n + j]);
                }
            }
        }
        let (a, b, dist) = best;
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((na + nk) * d[a * n + k] + (nb + nk) * d[b * n + k] - nk * dist)
                / (na + nb + nk);
            d[a * n + k] = v;
            d[k * n + a] = v;
        }
        size[a] += size[b];
        active[b] = false;
        merges.push(Merge {
            into: a,
            absorbed: b,
            dissimilarity: dist,
        });
    }
    Dendrogram { n, merges }
}
