//! Fixtures and brute-force oracles shared by the oracle suites and the
//! acceptance suite.

// Each test binary uses a different subset.
#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use topicflow::corpus::TokenizedCorpus;
use topicflow::embed::EmbedConfig;

// coherence
pub const DOCS: [&str; 5] = [
    "paz acuerdo farc gobierno paz firma acuerdo habana",
    "gol seleccion colombia partido gol mundial",
    "acuerdo paz gobierno congreso votacion plebiscito paz",
    "partido seleccion gol falcao james colombia gol triunfo",
    "lluvia bogota alerta paz invierno bogota",
];

pub fn coherence_corpus() -> TokenizedCorpus {
    let lists: Vec<(String, Vec<&str>)> = DOCS
        .iter()
        .enumerate()
        .map(|(i, d)| (format!("d{i}"), d.split_whitespace().collect()))
        .collect();
    TokenizedCorpus::from_token_lists(&lists).unwrap()
}

/// Materialises every window as a set of token strings.
pub fn enumerate_windows(window: usize) -> Vec<HashSet<&'static str>> {
    let mut out = Vec::new();
    for d in DOCS {
        let toks: Vec<&str> = d.split_whitespace().collect();
        if toks.len() <= window {
            out.push(toks.iter().copied().collect());
        } else {
            for s in 0..=toks.len() - window {
                out.push(toks[s..s + window].iter().copied().collect());
            }
        }
    }
    out
}

pub fn brute_prob(windows: &[HashSet<&str>], words: &[&str]) -> f64 {
    windows.iter().filter(|w| words.iter().all(|x| w.contains(x))).count() as f64 / windows.len() as f64
}

/// Direct transcription of the C_V definition for one topic.
pub fn brute_cv(windows: &[HashSet<&str>], topic: &[&str], eps: f64) -> f64 {
    let brute_npmi = |a: &str, b: &str| -> f64 {
        let (pa, pb, pab) = (
            brute_prob(windows, &[a]),
            brute_prob(windows, &[b]),
            brute_prob(windows, &[a, b]),
        );
        if pab == 1.0 {
            return 1.0;
        }
        ((pab + eps) / (pa * pb)).ln() / -(pab + eps).ln()
    };
    let vecs: Vec<Vec<f64>> = topic
        .iter()
        .map(|a| topic.iter().map(|b| brute_npmi(a, b)).collect())
        .collect();
    let total: Vec<f64> = (0..topic.len()).map(|j| vecs.iter().map(|v| v[j]).sum()).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    vecs.iter()
        .map(|v| v.iter().zip(&total).map(|(x, y)| x * y).sum::<f64>() / (norm(v) * norm(&total)))
        .sum::<f64>()
        / topic.len() as f64
}

// embed
pub const TEN_WORDS: [&str; 4] = [
    "rio lluvia alerta bogota rio",
    "gol partido estadio triunfo gol",
    "lluvia bogota invierno alerta",
    "partido estadio hinchas triunfo",
];

pub fn ten_word_corpus() -> TokenizedCorpus {
    let docs: Vec<(String, Vec<&str>)> = TEN_WORDS
        .iter()
        .enumerate()
        .map(|(i, d)| (format!("d{i}"), d.split(' ').collect()))
        .collect();
    let c = TokenizedCorpus::from_token_lists(&docs).unwrap();
    assert_eq!(c.vocabulary.len(), 10);
    c
}

pub fn small_cfg() -> EmbedConfig {
    EmbedConfig {
        dim: 6,
        buckets: 997,
        epochs: 4,
        lr: 0.1,
        ..Default::default()
    }
}

/// Central difference on one f32 parameter of a copy of `model`. The step
/// actually taken is measured after rounding to f32.
pub fn central_difference<M: Clone>(model: &M, x0: f32, set: impl Fn(&mut M, f32), loss: impl Fn(&M) -> f64) -> f64 {
    let mut probe = model.clone();
    let (xp, xm) = (x0 + STEP, x0 - STEP);
    set(&mut probe, xp);
    let lp = loss(&probe);
    set(&mut probe, xm);
    let lm = loss(&probe);
    (lp - lm) / (f64::from(xp) - f64::from(xm))
}

pub const STEP: f32 = 1e-3;

pub fn relative_error(a: f64, b: f64) -> f64 {
    // Floor keeps near-zero gradients from dividing by rounding noise.
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

pub fn check_rows<F>(grad: &[(usize, Vec<f64>)], mut numeric: F) -> f64
where
    F: FnMut(usize, usize) -> f64,
{
    let mut worst: f64 = 0.0;
    for (row, g) in grad {
        for (j, &analytic) in g.iter().enumerate() {
            worst = worst.max(relative_error(numeric(*row, j), analytic));
        }
    }
    worst
}
pub fn six_docs() -> Vec<(u32, Vec<&'static str>)> {
    vec![
        (0, vec!["rio", "lluvia", "alerta"]),
        (1, vec!["gol", "partido"]),
        (2, vec!["precio", "dolar", "mercado", "dolar"]),
        (0, vec!["bogota", "lluvia"]),
        (1, vec!["estadio", "gol", "triunfo"]),
        (2, vec!["mercado", "bolsa"]),
    ]
}

// cluster
pub fn blobs(seed: u64, n: usize, dim: usize, centers: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<Vec<f64>> = (0..centers)
        .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    (0..n)
        .map(|i| c[i % centers].iter().map(|x| x + rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Minimum within-cluster sum of squares over every 2-partition.
pub fn brute_force_two_means(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let sse = |members: &[&Vec<f64>]| -> f64 {
        let dim = members[0].len();
        let mean: Vec<f64> = (0..dim)
            .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
            .collect();
        members
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum()
    };
    let mut best = f64::INFINITY;
    for mask in 1..(1u32 << n) - 1 {
        let a: Vec<&Vec<f64>> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &points[i]).collect();
        let b: Vec<&Vec<f64>> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| &points[i]).collect();
        best = best.min(sse(&a) + sse(&b));
    }
    best
}
/// Independent representatives: rank-based quantile via explicit sorting of
/// (distance, index) pairs per cluster.
pub fn oracle_representatives(centroids: &[Vec<f64>], pts: &[Vec<f64>], p: f64) -> Vec<Vec<usize>> {
    let mut per: Vec<Vec<(f64, usize)>> = vec![Vec::new(); centroids.len()];
    for (i, x) in pts.iter().enumerate() {
        let d: Vec<f64> = centroids
            .iter()
            .map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        let mut j = 0;
        for t in 1..d.len() {
            if d[t] < d[j] {
                j = t;
            }
        }
        per[j].push((d[j], i));
    }
    per.into_iter()
        .map(|mut m| {
            if m.is_empty() {
                return Vec::new();
            }
            m.sort_by(|a, b| a.0.total_cmp(&b.0));
            let pos = p * (m.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            let q = m[lo].0 + (pos - lo as f64) * (m[hi].0 - m[lo].0);
            let mut ids: Vec<usize> = m.iter().filter(|e| e.0 <= q).map(|e| e.1).collect();
            ids.sort();
            ids
        })
        .collect()
}

// project
pub fn uniform_points(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect()
}

/// Three isotropic unit-variance Gaussian clusters in 50-D, 50 points each,
/// centers drawn with standard deviation 4 per coordinate.
pub fn three_gaussians(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wide = Normal::new(0.0, 4.0).unwrap();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..50).map(|_| wide.sample(&mut rng)).collect())
        .collect();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for i in 0..150 {
        let c = i % 3;
        pts.push(centers[c].iter().map(|m| m + unit.sample(&mut rng)).collect());
        labels.push(c);
    }
    (pts, labels)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
