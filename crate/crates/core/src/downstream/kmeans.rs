use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { max_iter: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub converged: bool,
}

impl KMeansModel {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }

    /// Nearest centroid for each row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.centroids.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.centroids.cols(),
                found: x.cols(),
            });
        }
        Ok(x.row_iter().map(|r| nearest(r, &self.centroids).0).collect())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the closest centroid (lowest index on ties).
fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.row_iter().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: each new centre is drawn with probability proportional
/// to the squared distance from the nearest existing centre.
fn seed_centroids(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = x.row_iter().map(|r| sq_dist(r, x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, r) in x.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, x.row(next)));
        }
    }
    chosen
}

/// Lloyd's algorithm from a seeded k-means++ start.
///
/// Stops when assignments no longer change or after `max_iter` rounds. A
/// cluster that empties keeps its previous centroid.
pub fn kmeans(x: &Matrix, k: usize, config: &KMeansConfig) -> Result<KMeansModel> {
    let (n, d) = x.shape();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("{n} points cannot form {k} clusters")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = seed_centroids(x, k, &mut rng);
    let mut centroids = x.select_rows(&init);
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iter.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, r) in x.row_iter().enumerate() {
            let (c, dist) = nearest(r, &centroids);
            inertia += dist;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        history.push(inertia);
        if !changed {
            converged = true;
            break;
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (r, &c) in x.row_iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut data = centroids.into_vec();
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    data[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            }
        }
        centroids = Matrix::from_vec(k, d, data)?;
    }
    Ok(KMeansModel {
        centroids,
        assignments,
        inertia_history: history,
        converged,
    })
}
