//! K-means over document vectors and centroid-distance representatives.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio::{BinReader, BinWriter};
use crate::error::{Error, Result};

const KM_MAGIC: &[u8] = b"TFKM1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop when the relative inertia change falls below this.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 12,
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
            seed: 42,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tol must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub config: KMeansConfig,
}

/// A fitted model with the training assignments and each point's distance
/// to its centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub model: KMeansModel,
    pub assignments: Vec<usize>,
    pub distances: Vec<f64>,
    /// Index of the restart that won.
    pub restart: usize,
}

/// One Lloyd run from fixed initial centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Inertia after each iteration's centroid update.
    pub inertia_history: Vec<f64>,
}

impl LloydRun {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&f64::INFINITY)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid and squared distance; ties go to the lowest index.
fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_vectors(vectors: &[Vec<f64>]) -> Result<usize> {
    let dim = vectors.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::invalid("vectors must be non-empty with at least one component"));
    }
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
    Ok(dim)
}

/// k-means++ seeding: first centroid uniform, then proportional to squared
/// distance to the nearest chosen centroid.
pub fn seed_centroids<R: Rng>(vectors: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![vectors[rng.gen_range(0..vectors.len())].clone()];
    let mut d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &centroids[0])).collect();
    while centroids.len() < k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every point coincides with a centroid already.
            Err(_) => rng.gen_range(0..vectors.len()),
        };
        let c = vectors[pick].clone();
        for (d, v) in d2.iter_mut().zip(vectors) {
            *d = d.min(sq_dist(v, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from `init` until the relative inertia change is below
/// `tol`, assignments stop changing, or `max_iter` is reached. An empty
/// cluster takes the point farthest from its current centroid among
/// clusters with more than one member.
pub fn lloyd(vectors: &[Vec<f64>], init: Vec<Vec<f64>>, max_iter: usize, tol: f64) -> Result<LloydRun> {
    let dim = check_vectors(vectors)?;
    let k = init.len();
    if k == 0 || init.iter().any(|c| c.len() != dim) {
        return Err(Error::invalid(
            "initial centroids must be non-empty and match the vector dimension",
        ));
    }
    if vectors.len() < k {
        return Err(Error::invalid(format!(
            "{} points cannot form {k} clusters",
            vectors.len()
        )));
    }
    let mut centroids = init;
    let mut assignments: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let nearest_all: Vec<(usize, f64)> = vectors.par_iter().map(|x| nearest(&centroids, x)).collect();
        let mut labels: Vec<usize> = nearest_all.iter().map(|p| p.0).collect();
        let mut dist: Vec<f64> = nearest_all.iter().map(|p| p.1).collect();
        repair_empty(&mut labels, &mut dist, k);
        let changed = labels != assignments;
        assignments = labels;
        centroids = means(vectors, &assignments, k, dim);
        let inertia: f64 = vectors
            .iter()
            .zip(&assignments)
            .map(|(x, &j)| sq_dist(x, &centroids[j]))
            .sum();
        let prev = history.last().copied();
        history.push(inertia);
        if !changed {
            break;
        }
        if let Some(p) = prev {
            if p - inertia <= tol * p.abs() {
                break;
            }
        }
    }
    Ok(LloydRun {
        centroids,
        assignments,
        inertia_history: history,
    })
}

fn repair_empty(labels: &mut [usize], dist: &mut [f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let far = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dist[b] >= dist[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = far {
            sizes[labels[i]] -= 1;
            labels[i] = j;
            dist[i] = 0.0;
            sizes[j] = 1;
        }
    }
}

fn means(vectors: &[Vec<f64>], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (x, &j) in vectors.iter().zip(labels) {
        counts[j] += 1;
        for (s, v) in sums[j].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    sums
}

/// Best of `restarts` seeded k-means++ / Lloyd runs by final inertia; ties
/// go to the earliest restart.
pub fn fit(vectors: &[Vec<f64>], cfg: &KMeansConfig) -> Result<KMeansFit> {
    cfg.validate()?;
    check_vectors(vectors)?;
    if vectors.len() < cfg.k {
        return Err(Error::invalid(format!(
            "{} points cannot form {} clusters",
            vectors.len(),
            cfg.k
        )));
    }
    let runs: Vec<Result<LloydRun>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
            let init = seed_centroids(vectors, cfg.k, &mut rng);
            lloyd(vectors, init, cfg.max_iter, cfg.tol)
        })
        .collect();
    let mut best: Option<(usize, LloydRun)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        if best.as_ref().map_or(true, |(_, b)| run.inertia() < b.inertia()) {
            best = Some((r, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");
    let distances = vectors
        .iter()
        .zip(&run.assignments)
        .map(|(x, &j)| sq_dist(x, &run.centroids[j]).sqrt())
        .collect();
    Ok(KMeansFit {
        model: KMeansModel {
            inertia: run.inertia(),
            centroids: run.centroids,
            config: cfg.clone(),
        },
        assignments: run.assignments,
        distances,
        restart,
    })
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Nearest centroid (ties to the lowest index) and Euclidean distance.
    pub fn nearest(&self, x: &[f64]) -> Result<(usize, f64)> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector has {} components, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        let (j, d) = nearest(&self.centroids, x);
        Ok((j, d.sqrt()))
    }

    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        Ok(self.nearest(x)?.0)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BinWriter::create(path, KM_MAGIC)?;
        w.json(&self.config)?;
        w.len(self.k())?;
        w.len(self.dim())?;
        w.f64s(&[self.inertia])?;
        for c in &self.centroids {
            w.f64s(c)?;
        }
        w.finish()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BinReader::open(path, KM_MAGIC)?;
        let config: KMeansConfig = r.json()?;
        let k = r.len()?;
        let dim = r.len()?;
        if k == 0 || dim == 0 {
            return Err(Error::format(path, "empty centroid matrix"));
        }
        let inertia = r.f64s(1)?[0];
        let centroids = (0..k).map(|_| r.f64s(dim)).collect::<Result<Vec<_>>>()?;
        r.expect_eof()?;
        if centroids.iter().flatten().any(|x| !x.is_finite()) || !(inertia >= 0.0) {
            return Err(Error::format(path, "non-finite centroid or negative inertia"));
        }
        Ok(KMeansModel {
            centroids,
            inertia,
            config,
        })
    }
}

/// Linear-interpolation quantile of sorted values: position `p * (n - 1)`.
pub fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per cluster, the indices of members whose distance to the centroid is
/// at or below the `percentile` quantile of that cluster's distances.
/// Every cluster has an entry, empty when it has no members.
pub fn representatives(
    model: &KMeansModel,
    vectors: &[Vec<f64>],
    percentile: f64,
) -> Result<BTreeMap<usize, Vec<usize>>> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::invalid(format!(
            "percentile must be in (0, 1], got {percentile}"
        )));
    }
    let mut members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.k()];
    for (i, x) in vectors.iter().enumerate() {
        let (j, d) = model.nearest(x)?;
        members[j].push((i, d));
    }
    let mut out = BTreeMap::new();
    for (j, m) in members.into_iter().enumerate() {
        let mut reps = Vec::new();
        if !m.is_empty() {
            let mut d: Vec<f64> = m.iter().map(|p| p.1).collect();
            d.sort_by(f64::total_cmp);
            let threshold = interpolated_quantile(&d, percentile);
            reps = m.iter().filter(|p| p.1 <= threshold).map(|p| p.0).collect();
        }
        out.insert(j, reps);
    }
    Ok(out)
}

/// Writes `doc_id,cluster,distance` rows.
pub fn write_assignments(path: &Path, ids: &[String], fit: &KMeansFit) -> Result<()> {
    if ids.len() != fit.assignments.len() {
        return Err(Error::invalid("one id per assigned vector is required"));
    }
    let mut out = String::from("doc_id,cluster,distance\n");
    for ((id, c), d) in ids.iter().zip(&fit.assignments).zip(&fit.distances) {
        out.push_str(&format!("{id},{c},{d:.9}\n"));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    proptest! {
        #[test]
        fn lloyd_inertia_never_increases(
            points in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 4..40),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let init = seed_centroids(&points, k, &mut rng);
            let run = lloyd(&points, init, 100, 0.0).unwrap();
            for w in run.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", run.inertia_history);
            }
            prop_assert_eq!(run.assignments.len(), points.len());
            let mut used = run.assignments.clone();
            used.sort();
            used.dedup();
            prop_assert_eq!(used.len(), k);
        }
    }

    fn square() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]]
    }

    #[test]
    fn four_point_optimum() {
        let fit = fit(
            &square(),
            &KMeansConfig {
                k: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((fit.model.inertia - 1.0).abs() < 1e-12);
        let mut cs = fit.model.centroids.clone();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cs, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
    }

    #[test]
    fn k1_is_mean() {
        let v = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![5.0, 3.0]];
        let fit = fit(
            &v,
            &KMeansConfig {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((fit.model.centroids[0][0] - 3.0).abs() < 1e-12);
        assert!((fit.model.centroids[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assign_ties_and_range() {
        let model = KMeansModel {
            centroids: vec![vec![0.0], vec![5.0], vec![-1.0], vec![9.0], vec![20.0], vec![1.0]],
            inertia: 0.0,
            config: KMeansConfig::default(),
        };
        assert_eq!(model.assign(&[5.0]).unwrap(), 1);
        assert_eq!(model.assign(&[1e9]).unwrap(), 4);
        // 0.0 is at distance 1 from centroids 2 and 5.
        let tie = KMeansModel {
            centroids: vec![vec![9.0], vec![8.0], vec![-1.0], vec![7.0], vec![6.0], vec![1.0]],
            ..model.clone()
        };
        assert_eq!(tie.assign(&[0.0]).unwrap(), 2);
        assert!(model.assign(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn errors() {
        assert!(fit(
            &square(),
            &KMeansConfig {
                k: 5,
                ..Default::default()
            }
        )
        .is_err());
        assert!(fit(
            &[vec![f64::NAN]],
            &KMeansConfig {
                k: 1,
                ..Default::default()
            }
        )
        .is_err());
        assert!(fit(
            &square(),
            &KMeansConfig {
                restarts: 0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Both initial centroids far to one side: one cluster starts empty.
        let v = square();
        let run = lloyd(&v, vec![vec![-100.0, 0.0], vec![-200.0, 0.0]], 50, 0.0).unwrap();
        let mut sizes = [0; 2];
        run.assignments.iter().for_each(|&a| sizes[a] += 1);
        assert!(sizes.iter().all(|&s| s > 0));
        assert!((run.inertia() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(interpolated_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(interpolated_quantile(&[1.0, 2.0, 3.0, 4.0], 1.0), 4.0);
        assert_eq!(interpolated_quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn representatives_examples() {
        let model = KMeansModel {
            centroids: vec![vec![0.0], vec![100.0]],
            inertia: 0.0,
            config: KMeansConfig::default(),
        };
        let v = vec![vec![3.0], vec![1.0], vec![-4.0], vec![2.0], vec![100.0]];
        let reps = representatives(&model, &v, 0.5).unwrap();
        assert_eq!(reps[&0], vec![1, 3]);
        assert_eq!(reps[&1], vec![4]);
        let all = representatives(&model, &v, 1.0).unwrap();
        assert_eq!(all[&0], vec![0, 1, 2, 3]);
        assert!(representatives(&model, &v, 0.0).is_err());
        let lonely = KMeansModel {
            centroids: vec![vec![0.0], vec![50.0]],
            ..model
        };
        assert_eq!(
            representatives(&lonely, &[vec![1.0]], 0.2).unwrap()[&1],
            Vec::<usize>::new()
        );
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("km.tfkm");
        let fit = fit(
            &square(),
            &KMeansConfig {
                k: 2,
                ..Default::default()
            },
        )
        .unwrap();
        fit.model.save(&p).unwrap();
        assert_eq!(KMeansModel::load(&p).unwrap(), fit.model);
        let csv = dir.path().join("a.csv");
        let ids: Vec<String> = (0..4).map(|i| format!("n{i}")).collect();
        write_assignments(&csv, &ids, &fit).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("doc_id,cluster,distance\nn0,"));
        assert_eq!(text.lines().count(), 5);
    }
}
