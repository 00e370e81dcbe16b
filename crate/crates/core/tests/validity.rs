mod common;

use geosom::som::{Lattice, SomConfig, SomModel};
use geosom::validity::{dbi, scan_k, silhouette, supercluster, ward_linkage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{naive_centroids, naive_dbi, naive_silhouette};

fn model(weights: Vec<Vec<f64>>, rows: usize, cols: usize) -> SomModel {
    SomModel {
        lattice: Lattice::new(rows, cols),
        feature_names: (0..weights[0].len()).map(|j| format!("f{j}")).collect(),
        weights,
        config: SomConfig::new(rows, cols, 1.0, 0.5, 1, 0),
        history: vec![],
    }
}

fn points_and_labels() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (4usize..20, 2usize..4).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), n),
            prop::collection::vec(0..k, n),
        )
    })
}

fn compact(labels: &[usize]) -> Option<Vec<usize>> {
    let mut seen = Vec::new();
    for &l in labels {
        if !seen.contains(&l) {
            seen.push(l);
        }
    }
    seen.sort();
    if seen.len() < 2 {
        return None;
    }
    Some(labels.iter().map(|l| seen.iter().position(|s| s == l).unwrap()).collect())
}

fn sq_within(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let c = naive_centroids(points, labels, k);
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| p.iter().zip(&c[l]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

proptest! {
    #[test]
    fn indices_match_their_definitions((points, raw) in points_and_labels()) {
        let Some(labels) = compact(&raw) else { return Ok(()) };
        let k = labels.iter().max().unwrap() + 1;
        let s = silhouette(&points, &labels).unwrap().mean;
        prop_assert!((s - naive_silhouette(&points, &labels)).abs() < 1e-9);
        let c = naive_centroids(&points, &labels, k);
        if let Ok(d) = dbi(&points, &labels, &c) {
            prop_assert!((d - naive_dbi(&points, &labels, &c)).abs() < 1e-9 * d.max(1.0));
        }
    }

    #[test]
    fn indices_ignore_label_names_and_point_order(
        (points, raw) in points_and_labels(),
        shift in 0usize..7,
        seed in any::<u64>(),
    ) {
        let Some(labels) = compact(&raw) else { return Ok(()) };
        let k = labels.iter().max().unwrap() + 1;
        let renamed: Vec<usize> = labels.iter().map(|l| (l + shift) % k).collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let p2: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
        let l2: Vec<usize> = order.iter().map(|&i| renamed[i]).collect();
        let s1 = silhouette(&points, &labels).unwrap().mean;
        let s2 = silhouette(&p2, &l2).unwrap().mean;
        prop_assert!((s1 - s2).abs() < 1e-9);
        let d1 = dbi(&points, &labels, &naive_centroids(&points, &labels, k));
        let d2 = dbi(&p2, &l2, &naive_centroids(&p2, &l2, k));
        match (d1, d2) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9 * a.max(1.0)),
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn indices_survive_rigid_motions(
        (points, raw) in points_and_labels(),
        angle in 0.0f64..std::f64::consts::TAU,
        offset in prop::collection::vec(-50.0f64..50.0, 3),
    ) {
        let Some(labels) = compact(&raw) else { return Ok(()) };
        let k = labels.iter().max().unwrap() + 1;
        let (s, c) = angle.sin_cos();
        let moved: Vec<Vec<f64>> = points
            .iter()
            .map(|p| vec![c * p[0] - s * p[1] + offset[0], s * p[0] + c * p[1] + offset[1], p[2] + offset[2]])
            .collect();
        let a = silhouette(&points, &labels).unwrap().mean;
        let b = silhouette(&moved, &labels).unwrap().mean;
        prop_assert!((a - b).abs() < 1e-7);
        if let (Ok(a), Ok(b)) = (
            dbi(&points, &labels, &naive_centroids(&points, &labels, k)),
            dbi(&moved, &labels, &naive_centroids(&moved, &labels, k)),
        ) {
            prop_assert!((a - b).abs() < 1e-7 * a.max(1.0));
        }
    }

    #[test]
    fn ward_split_of_two_tight_groups_is_optimal(
        a in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..5),
        b in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..5),
        gap in 20.0f64..100.0,
    ) {
        let mut points = a.clone();
        points.extend(b.iter().map(|p| vec![p[0] + gap, p[1]]));
        let n = points.len();
        prop_assume!(n >= 3);
        let labels = ward_linkage(&points).cut(2);
        let ward_cost = sq_within(&points, &labels, 2);
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << (n - 1)) {
            let split: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            best = best.min(sq_within(&points, &split, 2));
        }
        prop_assert!((ward_cost - best).abs() < 1e-9 * best.max(1.0));
        prop_assert!(labels[..a.len()].iter().all(|&l| l == labels[0]));
        prop_assert!(labels[a.len()..].iter().all(|&l| l != labels[0]));
    }
}

#[test]
fn three_blobs_of_neurons_choose_three() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let centers = [[0.0, 0.0, 0.0], [12.0, 0.0, 3.0], [0.0, 12.0, -3.0]];
    let weights: Vec<Vec<f64>> = (0..36)
        .map(|i| centers[i % 3].iter().map(|c| c + rng.random_range(-1.0..1.0)).collect())
        .collect();
    let report = scan_k(&model(weights.clone(), 6, 6), 2, 8).unwrap();
    assert_eq!(report.chosen_k, 3);
    assert_eq!(report.dbi_argmin_k, 3);
    let sc = supercluster(&model(weights, 6, 6), 3).unwrap();
    for c in 0..3 {
        let first = sc.neuron_labels[c];
        assert!((c..36).step_by(3).all(|i| sc.neuron_labels[i] == first));
    }
}
