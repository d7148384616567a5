//! 2D projection of document vectors with the UMAP procedure: exact k-NN,
//! smooth fuzzy memberships, and a force-directed layout.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BISECTION_STEPS: usize = 64;
const GRAD_CLIP: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub epochs: usize,
    pub neg_rate: usize,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            n_neighbors: 15,
            min_dist: 0.1,
            epochs: 200,
            neg_rate: 5,
            seed: 42,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors < 2 {
            return Err(Error::invalid("n_neighbors must be at least 2"));
        }
        if !(self.min_dist > 0.0 && self.min_dist.is_finite()) {
            return Err(Error::invalid(format!(
                "min_dist must be positive, got {}",
                self.min_dist
            )));
        }
        Ok(())
    }
}

/// Neighbor lists: `indices[i]` and `distances[i]` in ascending distance,
/// ties by index, never containing `i` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

/// Symmetric membership graph as a sorted edge list with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    /// Per point: nearest-neighbor distance and the solved bandwidth.
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Per point: the directed membership sum the bandwidth was solved for.
    pub membership_sums: Vec<f64>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map_or(0.0, |p| self.edges[p].2)
    }
}

/// One 2D point per input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    pub points: Vec<[f64; 2]>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_vectors(vectors: &[Vec<f64>]) -> Result<()> {
    let dim = vectors.first().map_or(0, Vec::len);
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::invalid(format!(
                "vector {i} has {} components, expected {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("vector {i} has a non-finite component")));
        }
    }
    Ok(())
}

/// Indices of all other points ordered by (distance, index).
fn ranked_neighbors(vectors: &[Vec<f64>], i: usize) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = (0..vectors.len())
        .filter(|&j| j != i)
        .map(|j| (euclid(&vectors[i], &vectors[j]), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d
}

/// Exact brute-force k-NN, O(n^2), parallel over query points.
pub fn knn_graph(vectors: &[Vec<f64>], n_neighbors: usize) -> Result<KnnGraph> {
    check_vectors(vectors)?;
    if n_neighbors == 0 || vectors.len() <= n_neighbors {
        return Err(Error::invalid(format!(
            "need more than {n_neighbors} points for {n_neighbors} neighbors, got {}",
            vectors.len()
        )));
    }
    let rows: Vec<Vec<(f64, usize)>> = (0..vectors.len())
        .into_par_iter()
        .map(|i| {
            let mut r = ranked_neighbors(vectors, i);
            r.truncate(n_neighbors);
            r
        })
        .collect();
    Ok(KnnGraph {
        indices: rows.iter().map(|r| r.iter().map(|p| p.1).collect()).collect(),
        distances: rows.iter().map(|r| r.iter().map(|p| p.0).collect()).collect(),
    })
}

fn membership_sum(dists: &[f64], rho: f64, sigma: f64) -> f64 {
    dists.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum()
}

/// Bandwidth with `sum_j exp(-max(0, d_j - rho) / sigma) = target`, by
/// bisection that doubles the upper end while it is unbounded.
fn solve_sigma(dists: &[f64], rho: f64, target: f64) -> f64 {
    let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
    for _ in 0..BISECTION_STEPS {
        if membership_sum(dists, rho, mid) > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    mid
}

/// Smooth k-NN memberships symmetrised with the probabilistic union
/// `a + b - ab`.
pub fn fuzzy_graph(knn: &KnnGraph) -> FuzzyGraph {
    let n = knn.indices.len();
    let target = (knn.indices.first().map_or(2, Vec::len) as f64).log2();
    let mut rho = vec![0.0; n];
    let mut sigma = vec![1.0; n];
    let mut sums = vec![0.0; n];
    let mut directed = std::collections::BTreeMap::new();
    for i in 0..n {
        let d = &knn.distances[i];
        rho[i] = d.first().copied().unwrap_or(0.0);
        sigma[i] = solve_sigma(d, rho[i], target);
        sums[i] = membership_sum(d, rho[i], sigma[i]);
        for (&j, &dij) in knn.indices[i].iter().zip(d) {
            let w = (-(dij - rho[i]).max(0.0) / sigma[i]).exp();
            directed.insert((i, j), w);
        }
    }
    let mut edges = Vec::new();
    for (&(i, j), &w) in &directed {
        let back = directed.get(&(j, i)).copied().unwrap_or(0.0);
        if i < j || !directed.contains_key(&(j, i)) {
            let s = w + back - w * back;
            if s > 0.0 {
                edges.push((i.min(j), i.max(j), s));
            }
        }
    }
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    FuzzyGraph {
        n,
        edges,
        rho,
        sigma,
        membership_sums: sums,
    }
}

/// Least-squares fit of `1 / (1 + a x^(2b))` to the curve that is 1 up to
/// `min_dist` and `exp(-(x - min_dist) / spread)` beyond, on 300 points of
/// `[0, 3 spread]`. Levenberg-Marquardt from (1, 1).
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (1.0 / (1.0 + a * x.powf(2.0 * b)) - y).powi(2))
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut damping = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        // Normal equations J^T J and J^T r for the two parameters.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let f = 1.0 / (1.0 + a * p);
            let r = f - y;
            let da = -p * f * f;
            let db = -a * p * 2.0 * x.ln() * f * f;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let (maa, mbb) = (jaa * (1.0 + damping), jbb * (1.0 + damping));
        let det = maa * mbb - jab * jab;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let step_a = -(mbb * ga - jab * gb) / det;
        let step_b = -(maa * gb - jab * ga) / det;
        let (na, nb) = (a + step_a, b + step_b);
        let new_cost = if na > 0.0 && nb > 0.0 {
            sse(na, nb)
        } else {
            f64::INFINITY
        };
        if new_cost < cost {
            let done = (cost - new_cost) <= 1e-15 * cost.max(1e-300);
            a = na;
            b = nb;
            cost = new_cost;
            damping = (damping / 10.0).max(1e-12);
            if done {
                break;
            }
        } else {
            damping *= 10.0;
            if damping > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

fn clip(x: f64) -> f64 {
    x.clamp(-GRAD_CLIP, GRAD_CLIP)
}

/// Force-directed layout of the fuzzy graph. Edges are sampled in
/// proportion to their weight; each sample pulls the two ends together and
/// pushes the head away from `neg_rate` random points.
pub fn layout(graph: &FuzzyGraph, cfg: &ProjectionConfig) -> Result<Embedding2D> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = graph.n;
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)])
        .collect();
    if n < 2 || graph.edges.is_empty() || cfg.epochs == 0 {
        return Ok(Embedding2D { points: y });
    }
    let (a, b) = fit_ab(cfg.min_dist, 1.0);
    let w_max = graph.edges.iter().map(|e| e.2).fold(0.0, f64::max);
    // Both directions of every edge, skipping edges too weak to be sampled.
    let mut heads = Vec::new();
    let mut tails = Vec::new();
    let mut eps = Vec::new();
    for &(i, j, w) in &graph.edges {
        let e = w_max / w;
        if e > cfg.epochs as f64 {
            continue;
        }
        for (h, t) in [(i, j), (j, i)] {
            heads.push(h);
            tails.push(t);
            eps.push(e);
        }
    }
    let mut next_sample = eps.clone();
    let neg_eps: Vec<f64> = eps.iter().map(|e| e / cfg.neg_rate.max(1) as f64).collect();
    let mut next_negative = neg_eps.clone();

    for epoch in 0..cfg.epochs {
        let alpha = 1.0 - epoch as f64 / cfg.epochs as f64;
        let now = epoch as f64;
        for e in 0..heads.len() {
            if next_sample[e] > now {
                continue;
            }
            let (i, j) = (heads[e], tails[e]);
            let diff = [y[i][0] - y[j][0], y[i][1] - y[j][1]];
            let d2 = diff[0] * diff[0] + diff[1] * diff[1];
            if d2 > 0.0 {
                let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
                for k in 0..2 {
                    let g = clip(coeff * diff[k]) * alpha;
                    y[i][k] += g;
                    y[j][k] -= g;
                }
            }
            next_sample[e] += eps[e];

            if cfg.neg_rate > 0 {
                let count = ((now - next_negative[e]) / neg_eps[e]).floor().max(0.0) as usize;
                for _ in 0..count {
                    let k = rng.gen_range(0..n);
                    if k == i {
                        continue;
                    }
                    let diff = [y[i][0] - y[k][0], y[i][1] - y[k][1]];
                    let d2 = diff[0] * diff[0] + diff[1] * diff[1];
                    let coeff = if d2 > 0.0 {
                        2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                    } else {
                        0.0
                    };
                    for c in 0..2 {
                        let g = if coeff > 0.0 { clip(coeff * diff[c]) } else { GRAD_CLIP };
                        y[i][c] += g * alpha;
                    }
                }
                next_negative[e] += count as f64 * neg_eps[e];
            }
        }
        if y.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::NonFinite {
                stage: "project",
                step: epoch,
            });
        }
    }
    Ok(Embedding2D { points: y })
}

/// k-NN, fuzzy graph and layout in one call.
pub fn project(vectors: &[Vec<f64>], cfg: &ProjectionConfig) -> Result<Embedding2D> {
    cfg.validate()?;
    check_vectors(vectors)?;
    if vectors.len() <= 1 {
        let graph = FuzzyGraph {
            n: vectors.len(),
            edges: Vec::new(),
            rho: vec![0.0; vectors.len()],
            sigma: vec![1.0; vectors.len()],
            membership_sums: vec![0.0; vectors.len()],
        };
        return layout(&graph, cfg);
    }
    let k = cfg.n_neighbors.min(vectors.len() - 1);
    let graph = fuzzy_graph(&knn_graph(vectors, k)?);
    layout(&graph, cfg)
}

/// Trustworthiness of a 2D embedding at neighborhood size `k`: one minus
/// the normalised rank excess, in the original space, of points that are
/// 2D neighbors but not original-space neighbors.
pub fn trustworthiness(high: &[Vec<f64>], low: &Embedding2D, k: usize) -> Result<f64> {
    let n = high.len();
    if low.points.len() != n {
        return Err(Error::invalid(format!(
            "{} vectors but {} projected points",
            n,
            low.points.len()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k must be in 1..{n}, got {k}")));
    }
    check_vectors(high)?;
    let low_vecs: Vec<Vec<f64>> = low.points.iter().map(|p| p.to_vec()).collect();
    let penalty: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let high_rank = ranked_neighbors(high, i);
            let mut rank = vec![0usize; n];
            for (r, &(_, j)) in high_rank.iter().enumerate() {
                rank[j] = r + 1;
            }
            ranked_neighbors(&low_vecs, i)
                .iter()
                .take(k)
                .map(|&(_, j)| rank[j].saturating_sub(k) as f64)
                .sum::<f64>()
        })
        .sum();
    // Largest possible penalty: every point's k low-D neighbors are its k
    // farthest points in the original space.
    let worst: f64 = n as f64 * ((k + 1).max(n - k)..n).map(|r| (r - k) as f64).sum::<f64>();
    if worst == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - penalty / worst)
}

/// Writes `doc_id,x,y,label` rows.
pub fn write_projection(path: &Path, ids: &[String], emb: &Embedding2D, labels: &[usize]) -> Result<()> {
    if ids.len() != emb.points.len() || labels.len() != emb.points.len() {
        return Err(Error::invalid("ids, points and labels must have the same length"));
    }
    let mut out = String::from("doc_id,x,y,label\n");
    for ((id, p), l) in ids.iter().zip(&emb.points).zip(labels) {
        out.push_str(&format!("{id},{:.9},{:.9},{l}\n", p[0], p[1]));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_knn() {
        let v = vec![vec![0.0], vec![1.0], vec![3.0]];
        let g = knn_graph(&v, 2).unwrap();
        assert_eq!(g.indices, vec![vec![1, 2], vec![0, 2], vec![1, 0]]);
        assert!(knn_graph(&v, 3).is_err());
        let dup = knn_graph(&[vec![1.0], vec![1.0], vec![2.0]], 1).unwrap();
        assert_eq!(dup.distances[0], vec![0.0]);
    }

    #[test]
    fn nearest_neighbor_weight_is_one() {
        let v: Vec<Vec<f64>> = (0..10).map(|i| vec![(i * i) as f64]).collect();
        let knn = knn_graph(&v, 4).unwrap();
        let g = fuzzy_graph(&knn);
        for i in 0..10 {
            let j = knn.indices[i][0];
            assert!(g.weight(i, j) >= 1.0 - 1e-12);
            assert!((g.membership_sums[i] - 2.0).abs() < 1e-6, "{}", g.membership_sums[i]);
        }
    }

    #[test]
    fn union_formula() {
        let union = |a: f64, b: f64| a + b - a * b;
        assert_eq!(union(1.0, 0.0), 1.0);
        assert_eq!(union(1.0, 1.0), 1.0);
        assert_eq!(union(0.0, 0.0), 0.0);
    }

    #[test]
    fn ab_matches_reference_curve() {
        let (a, b) = fit_ab(0.1, 1.0);
        assert!((a - 1.577).abs() < 0.01, "a = {a}");
        assert!((b - 0.895).abs() < 0.01, "b = {b}");
    }

    #[test]
    fn single_point_stays_put() {
        let cfg = ProjectionConfig::default();
        let e = project(&[vec![1.0, 2.0]], &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let x: f64 = rng.gen_range(-10.0..10.0);
        assert_eq!(e.points[0][0], x);
    }

    #[test]
    fn trustworthiness_boundaries() {
        let v: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let e = Embedding2D {
            points: v.iter().map(|p| [p[0], p[1]]).collect(),
        };
        assert!((trustworthiness(&v, &e, 3).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(trustworthiness(&v, &e, 11).unwrap(), 1.0);
        assert!(trustworthiness(&v, &e, 12).is_err());
        assert!(trustworthiness(&v, &e, 0).is_err());
    }
}
