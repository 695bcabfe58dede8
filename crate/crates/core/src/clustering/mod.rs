//! K-means over embedding rows and the subsamplers built on it.

mod sample;

pub use sample::{diverse_sample, random_sample, SampleMode, SamplePlan, WithinOrder};

use rand::Rng;
use thiserror::Error;

use crate::random::stream_rng;
use crate::tensor::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("cannot cluster an empty matrix")]
    EmptyInput,
    #[error("need at least k = {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("non-finite value at row {0}")]
    NonFinite(usize),
    #[error("inertia increased from {before} to {after} at iteration {iteration}")]
    NonMonotone {
        iteration: usize,
        before: f64,
        after: f64,
    },
    #[error("requested {requested} samples from {available} points")]
    TargetTooLarge { requested: usize, available: usize },
    #[error("invalid sample plan: {0}")]
    BadPlan(String),
    #[error("assignment {value} at position {index} is not below k = {k}")]
    BadAssignment { index: usize, value: usize, k: usize },
}

pub type Result<T> = std::result::Result<T, ClusterError>;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
    /// L2-normalize rows before clustering.
    pub normalize: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 512,
            seed: 0,
            max_iters: 100,
            tol: 1e-4,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    /// Squared distance of each point to its assigned centroid.
    pub distances: Vec<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step, first entry from the seeding.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn diverse_sample(&self, n_target: usize, seed: u64, within: WithinOrder) -> Result<Vec<usize>> {
        diverse_sample(&self.assignments, self.k, Some(&self.distances), n_target, seed, within)
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per point (ties to the lowest index) and total inertia.
fn assign(x: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>, f64) {
    let mut assignments = Vec::with_capacity(x.rows());
    let mut distances = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let p = x.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let d = sq_dist(p, centroids.row(c));
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        assignments.push(best);
        distances.push(best_d);
    }
    let inertia = distances.iter().sum();
    (assignments, distances, inertia)
}

/// k-means++ seeding.
fn seed_centroids<R: Rng>(x: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = x.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // Round-off can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

/// Mean of each cluster, accumulated in point order. Empty clusters are moved
/// to the points farthest from their current centroids.
fn update(x: &Matrix, k: usize, assignments: &[usize], distances: &[f64]) -> Matrix {
    let d = x.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    let mut used = vec![false; x.rows()];
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            sums.row_mut(c).iter_mut().for_each(|v| *v /= n);
            continue;
        }
        let mut far = None;
        for (i, &dist) in distances.iter().enumerate() {
            if used[i] {
                continue;
            }
            match far {
                Some((_, best)) if dist <= best => {}
                _ => far = Some((i, dist)),
            }
        }
        if let Some((i, _)) = far {
            used[i] = true;
            sums.row_mut(c).copy_from_slice(x.row(i));
        }
    }
    sums
}

pub(crate) fn prepare(x: &Matrix, normalize: bool) -> Result<Matrix> {
    if x.rows() == 0 {
        return Err(ClusterError::EmptyInput);
    }
    if let Some(i) = (0..x.rows()).find(|&i| x.row(i).iter().any(|v| !v.is_finite())) {
        return Err(ClusterError::NonFinite(i));
    }
    Ok(if normalize { x.l2_normalize_rows() } else { x.clone() })
}

/// Lloyd iterations from a k-means++ start.
pub fn kmeans_fit(x: &Matrix, config: &KMeansConfig) -> Result<KMeansModel> {
    if config.k == 0 {
        return Err(ClusterError::ZeroK);
    }
    let x = prepare(x, config.normalize)?;
    if x.rows() < config.k {
        return Err(ClusterError::TooFewPoints {
            n: x.rows(),
            k: config.k,
        });
    }
    let mut rng = stream_rng(config.seed, "kmeans++");
    let mut centroids = seed_centroids(&x, config.k, &mut rng);
    let (mut assignments, mut distances, mut inertia) = assign(&x, &centroids);
    let mut history = vec![inertia];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        iterations += 1;
        let next = update(&x, config.k, &assignments, &distances);
        let shift = (0..config.k)
            .map(|c| sq_dist(next.row(c), centroids.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let (a, d, new_inertia) = assign(&x, &centroids);
        let slack = 1e-9 * inertia.abs().max(1.0);
        if new_inertia > inertia + slack {
            return Err(ClusterError::NonMonotone {
                iteration: iterations,
                before: inertia,
                after: new_inertia,
            });
        }
        assignments = a;
        distances = d;
        inertia = new_inertia;
        history.push(inertia);
        if shift < config.tol {
            converged = true;
            break;
        }
    }

    Ok(KMeansModel {
        k: config.k,
        centroids,
        assignments,
        distances,
        inertia,
        inertia_history: history,
        iterations,
        converged,
    })
}

/// Runs `restarts` fits with seeds `seed, seed + 1, ...` and keeps the lowest
/// inertia (earliest seed on ties).
pub fn kmeans_best_of(x: &Matrix, config: &KMeansConfig, restarts: usize) -> Result<KMeansModel> {
    let mut best: Option<KMeansModel> = None;
    for r in 0..restarts.max(1) {
        let cfg = KMeansConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let model = kmeans_fit(x, &cfg)?;
        if best.as_ref().map_or(true, |b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn cfg(k: usize, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn two_obvious_clusters() {
        let x = pts(&[[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]);
        for seed in 0..20 {
            let m = kmeans_fit(&x, &cfg(2, seed)).unwrap();
            assert_eq!(m.assignments[0], m.assignments[1]);
            assert_eq!(m.assignments[2], m.assignments[3]);
            assert_ne!(m.assignments[0], m.assignments[2]);
            assert!((m.inertia - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn k_equals_n() {
        let x = pts(&[[0.0, 0.0], [1.0, 5.0], [-3.0, 2.0]]);
        let m = kmeans_fit(&x, &cfg(3, 1)).unwrap();
        assert_eq!(m.inertia, 0.0);
        let mut a = m.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn identical_points() {
        let x = pts(&[[2.0, 2.0]; 5]);
        let m = kmeans_fit(&x, &cfg(2, 0)).unwrap();
        assert_eq!(m.inertia, 0.0);
        assert!(m.cluster_sizes().contains(&5));
    }

    #[test]
    fn errors() {
        let x = pts(&[[0.0, 0.0]]);
        assert_eq!(kmeans_fit(&x, &cfg(2, 0)).unwrap_err(), ClusterError::TooFewPoints { n: 1, k: 2 });
        assert_eq!(kmeans_fit(&Matrix::zeros(0, 2), &cfg(1, 0)).unwrap_err(), ClusterError::EmptyInput);
        assert_eq!(kmeans_fit(&x, &cfg(0, 0)).unwrap_err(), ClusterError::ZeroK);
    }

    #[test]
    fn history_is_monotone_and_assignments_nearest() {
        let mut rng = stream_rng(9, "t");
        let x = Matrix::from_vec(60, 3, (0..180).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap();
        let m = kmeans_fit(&x, &cfg(5, 2)).unwrap();
        assert!(m.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        for i in 0..60 {
            let own = sq_dist(x.row(i), m.centroids.row(m.assignments[i]));
            for c in 0..5 {
                assert!(own <= sq_dist(x.row(i), m.centroids.row(c)) + 1e-9);
            }
        }
    }

    #[test]
    fn normalize_flag() {
        let x = pts(&[[3.0, 0.0], [100.0, 0.0], [0.0, 2.0], [0.0, 50.0]]);
        let m = kmeans_fit(
            &x,
            &KMeansConfig {
                normalize: true,
                ..cfg(2, 0)
            },
        )
        .unwrap();
        assert_eq!(m.assignments[0], m.assignments[1]);
        assert_eq!(m.assignments[2], m.assignments[3]);
        assert!(m.inertia < 1e-12);
    }
}
