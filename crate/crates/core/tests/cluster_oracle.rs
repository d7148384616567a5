//! K-means against exhaustive partitions and representative selection
//! against an independent quantile computation.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicflow::cluster::{self, KMeansConfig};

use common::*;

#[test]
fn four_points_reach_brute_force_optimum() {
    let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]];
    let opt = brute_force_two_means(&pts);
    assert!((opt - 1.0).abs() < 1e-12);
    let fit = cluster::fit(
        &pts,
        &KMeansConfig {
            k: 2,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((fit.model.inertia - opt).abs() < 1e-12);
}

#[test]
fn small_random_sets_match_brute_force() {
    for seed in 0..10 {
        let pts = blobs(seed, 9, 2, 2);
        let fit = cluster::fit(
            &pts,
            &KMeansConfig {
                k: 2,
                restarts: 10,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let opt = brute_force_two_means(&pts);
        assert!(
            fit.model.inertia <= opt + 1e-9,
            "seed {seed}: {} vs {opt}",
            fit.model.inertia
        );
    }
}

#[test]
fn inertia_never_increases() {
    for instance in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + instance);
        let k = rng.gen_range(2..7);
        let pts = blobs(instance, 60, 3, 4);
        let init = cluster::seed_centroids(&pts, k, &mut rng);
        let run = cluster::lloyd(&pts, init, 100, 0.0).unwrap();
        for w in run.inertia_history.windows(2) {
            assert!(w[1] <= w[0], "instance {instance}: {:?}", run.inertia_history);
        }
    }
}

#[test]
fn converged_fit_is_consistent() {
    let pts = blobs(3, 200, 4, 5);
    let cfg = KMeansConfig {
        k: 5,
        tol: 0.0,
        ..Default::default()
    };
    let fit = cluster::fit(&pts, &cfg).unwrap();
    for (x, &a) in pts.iter().zip(&fit.assignments) {
        assert_eq!(fit.model.assign(x).unwrap(), a);
    }
    for j in 0..5 {
        let members: Vec<&Vec<f64>> = pts
            .iter()
            .zip(&fit.assignments)
            .filter(|(_, &a)| a == j)
            .map(|(p, _)| p)
            .collect();
        for d in 0..4 {
            let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            assert!((mean - fit.model.centroids[j][d]).abs() < 1e-9);
        }
    }

    let k1 = cluster::fit(
        &pts,
        &KMeansConfig {
            k: 1,
            ..Default::default()
        },
    )
    .unwrap();
    for d in 0..4 {
        let mean = pts.iter().map(|p| p[d]).sum::<f64>() / pts.len() as f64;
        assert!((k1.model.centroids[0][d] - mean).abs() < 1e-12);
    }
}

#[test]
fn translation_moves_centroids_only() {
    let pts = blobs(8, 120, 3, 3);
    let shift = [64.0, -32.0, 8.0];
    let moved: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect())
        .collect();
    let cfg = KMeansConfig {
        k: 3,
        ..Default::default()
    };
    let a = cluster::fit(&pts, &cfg).unwrap();
    let b = cluster::fit(&moved, &cfg).unwrap();
    assert_eq!(a.assignments, b.assignments);
    for (ca, cb) in a.model.centroids.iter().zip(&b.model.centroids) {
        for d in 0..3 {
            assert!((ca[d] + shift[d] - cb[d]).abs() < 1e-9);
        }
    }
}

#[test]
fn fit_is_deterministic() {
    let pts = blobs(4, 150, 5, 4);
    let cfg = KMeansConfig {
        k: 4,
        seed: 17,
        ..Default::default()
    };
    assert_eq!(cluster::fit(&pts, &cfg).unwrap(), cluster::fit(&pts, &cfg).unwrap());
}

#[test]
fn representatives_match_oracle_on_1000_vectors() {
    let pts = blobs(21, 1000, 8, 6);
    let fit = cluster::fit(
        &pts,
        &KMeansConfig {
            k: 6,
            ..Default::default()
        },
    )
    .unwrap();
    for p in [0.05, 0.2, 0.5, 0.9, 1.0] {
        let ours = cluster::representatives(&fit.model, &pts, p).unwrap();
        let expected = oracle_representatives(&fit.model.centroids, &pts, p);
        for (j, e) in expected.iter().enumerate() {
            assert_eq!(&ours[&j], e, "cluster {j} percentile {p}");
        }
    }
}
