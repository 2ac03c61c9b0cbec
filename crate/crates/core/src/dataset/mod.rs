//! Embedding datasets: synthesis, partitioning, duplication, corruption, I/O.

mod corrupt;
mod io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

pub use corrupt::{corrupt, Corruption, MAX_SEVERITY};
pub use io::{read_binary, read_csv, read_embeddings, write_binary, write_csv, write_embeddings};

use crate::error::{Error, Result};
use crate::kernel::Matrix;

/// `n×d` embedding matrix with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: Matrix,
    labels: Option<Vec<u32>>,
    pub name: String,
}

impl EmbeddingSet {
    pub fn new(vectors: Matrix, labels: Option<Vec<u32>>, name: impl Into<String>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != vectors.rows() {
                return Err(Error::DimensionMismatch {
                    expected: vectors.rows(),
                    found: l.len(),
                });
            }
        }
        Ok(EmbeddingSet {
            vectors,
            labels,
            name: name.into(),
        })
    }

    pub fn unlabeled(vectors: Matrix, name: impl Into<String>) -> Self {
        EmbeddingSet {
            vectors,
            labels: None,
            name: name.into(),
        }
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// One past the largest label, or 0 when unlabeled.
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |&m| m as usize + 1)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_labels(self, labels: Vec<u32>) -> Result<Self> {
        EmbeddingSet::new(self.vectors, Some(labels), self.name)
    }

    pub fn select(&self, idx: &[usize]) -> EmbeddingSet {
        EmbeddingSet {
            vectors: self.vectors.select_rows(idx),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            name: self.name.clone(),
        }
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> EmbeddingSet {
        let idx: Vec<usize> = (start..end).collect();
        self.select(&idx)
    }

    pub fn into_parts(self) -> (Matrix, Option<Vec<u32>>, String) {
        (self.vectors, self.labels, self.name)
    }
}

/// Isotropic Gaussian mixture description.
///
/// `class_scales[c]` is the expected Euclidean norm of a point's deviation
/// from its class mean, so each coordinate has standard deviation
/// `class_scales[c] / sqrt(dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub class_means: Vec<Vec<f64>>,
    pub class_scales: Vec<f64>,
    pub points_per_class: usize,
    pub seed: u64,
}

impl MixtureSpec {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.num_classes == 0 {
            return Err(Error::InvalidArgument(
                "mixture needs dim > 0 and at least one class".into(),
            ));
        }
        if self.class_means.len() != self.num_classes || self.class_scales.len() != self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "expected {} class means and scales, got {} and {}",
                self.num_classes,
                self.class_means.len(),
                self.class_scales.len()
            )));
        }
        if let Some(m) = self.class_means.iter().find(|m| m.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.len(),
            });
        }
        if self.class_scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("class scales must be positive".into()));
        }
        Ok(())
    }
}

/// Samples `points_per_class` points from every class, rows shuffled.
pub fn gaussian_mixture(spec: &MixtureSpec) -> Result<EmbeddingSet> {
    if spec.points_per_class == 0 {
        return Err(Error::InvalidArgument("points_per_class must be positive".into()));
    }
    let counts = vec![spec.points_per_class; spec.num_classes];
    gaussian_mixture_with_counts(spec, &counts)
}

/// Like [`gaussian_mixture`] with an explicit per-class count (zeros allowed,
/// `points_per_class` ignored).
pub fn gaussian_mixture_with_counts(spec: &MixtureSpec, counts: &[usize]) -> Result<EmbeddingSet> {
    spec.validate()?;
    if counts.len() != spec.num_classes {
        return Err(Error::DimensionMismatch {
            expected: spec.num_classes,
            found: counts.len(),
        });
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels: Vec<u32> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c as u32, k))
        .collect();
    labels.shuffle(&mut rng);

    let mut data = Vec::with_capacity(n * d);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    for &c in &labels {
        let mean = &spec.class_means[c as usize];
        let sd = spec.class_scales[c as usize] * inv_sqrt_d;
        data.extend(mean.iter().map(|&m| {
            let z: f64 = StandardNormal.sample(&mut rng);
            m + sd * z
        }));
    }
    EmbeddingSet::new(Matrix::from_vec(n, d, data)?, Some(labels), "mixture")
}

/// Draws one point from Dirichlet(alpha, ..., alpha) over `dim` outcomes.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: f64, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidArgument(format!("dirichlet alpha {alpha}: {e}")))?;
    let mut p: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 && total.is_finite() {
        p.iter_mut().for_each(|v| *v /= total);
    } else {
        // every gamma draw underflowed: all mass lands on one outcome
        let hit = rng.random_range(0..dim);
        p.iter_mut().enumerate().for_each(|(i, v)| *v = f64::from(i == hit));
    }
    Ok(p)
}

/// Draws an index from unnormalized nonnegative weights.
pub(crate) fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.random_range(0..weights.len());
    }
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Splits a labeled set among sellers with heterogeneous class mixes.
///
/// Every seller draws class proportions `p_j ~ Dirichlet(alpha·1)`; each point
/// of class `c` then goes to seller `j` with probability proportional to
/// `p_j[c]`. Rows keep their input order within each seller.
pub fn dirichlet_partition(set: &EmbeddingSet, num_sellers: usize, alpha: f64, seed: u64) -> Result<Vec<EmbeddingSet>> {
    let labels = set.labels().ok_or(Error::Unlabeled)?;
    if num_sellers < 1 {
        return Err(Error::InvalidArgument("need at least one seller".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let classes = set.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let props = (0..num_sellers)
        .map(|_| sample_dirichlet(alpha, classes, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); num_sellers];
    let mut weights = vec![0.0; num_sellers];
    for (i, &c) in labels.iter().enumerate() {
        for (w, p) in weights.iter_mut().zip(&props) {
            *w = p[c as usize];
        }
        buckets[sample_weighted(&weights, &mut rng)].push(i);
    }
    Ok(buckets
        .iter()
        .enumerate()
        .map(|(j, idx)| set.select(idx).with_name(format!("{}-seller{j}", set.name)))
        .collect())
}

/// Replaces the set with `ceil(n/factor)` unique rows, each repeated `factor`
/// times (the last group truncated), keeping exactly `n` rows.
///
/// The unique pool is chosen by a seeded shuffle and kept in input order, so
/// `factor == 1` returns the input unchanged.
pub fn inject_duplicates(set: &EmbeddingSet, factor: usize, seed: u64) -> Result<EmbeddingSet> {
    if factor < 1 {
        return Err(Error::InvalidArgument("duplication factor must be >= 1".into()));
    }
    let n = set.len();
    let unique = n.div_ceil(factor);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut pool = perm[..unique].to_vec();
    pool.sort_unstable();
    let idx: Vec<usize> = (0..n).map(|i| pool[i / factor]).collect();
    Ok(set.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn spec(classes: usize, dim: usize, per_class: usize, scale: f64, seed: u64) -> MixtureSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        MixtureSpec {
            num_classes: classes,
            dim,
            class_means: (0..classes)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
            class_scales: vec![scale; classes],
            points_per_class: per_class,
            seed,
        }
    }

    fn row_counts(m: &Matrix) -> HashMap<Vec<u64>, usize> {
        let mut h = HashMap::new();
        for r in m.row_iter() {
            *h.entry(r.iter().map(|v| v.to_bits()).collect()).or_insert(0) += 1;
        }
        h
    }

    #[test]
    fn single_class_mean_within_clt_bound() {
        let s = MixtureSpec {
            num_classes: 1,
            dim: 8,
            class_means: vec![vec![0.0; 8]],
            class_scales: vec![0.1],
            points_per_class: 10_000,
            seed: 3,
        };
        let set = gaussian_mixture(&s).unwrap();
        let bound = 3.0 * 0.1 / (10_000f64).sqrt();
        for m in set.vectors().col_mean() {
            assert!(m.abs() < bound, "{m}");
        }
    }

    #[test]
    fn mixture_is_deterministic_and_counts_match() {
        let s = spec(2, 6, 500, 0.3, 11);
        let a = gaussian_mixture(&s).unwrap();
        assert_eq!(a, gaussian_mixture(&s).unwrap());
        let labels = a.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 500);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 500);
    }

    #[test]
    fn mixture_rejects_zero_sizes() {
        assert!(gaussian_mixture(&spec(2, 4, 0, 0.3, 1)).is_err());
        let mut s = spec(2, 4, 5, 0.3, 1);
        s.dim = 0;
        assert!(gaussian_mixture(&s).is_err());
    }

    #[test]
    fn partition_single_seller_is_identity() {
        let set = gaussian_mixture(&spec(3, 4, 20, 0.3, 5)).unwrap();
        let parts = dirichlet_partition(&set, 1, 0.5, 9).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].vectors(), set.vectors());
        assert_eq!(parts[0].labels(), set.labels());
    }

    #[test]
    fn partition_conserves_points() {
        let set = gaussian_mixture(&spec(4, 3, 50, 0.3, 6)).unwrap();
        let parts = dirichlet_partition(&set, 7, 0.5, 2).unwrap();
        assert_eq!(parts.iter().map(EmbeddingSet::len).sum::<usize>(), set.len());
        let mut merged = HashMap::new();
        for p in &parts {
            for (k, v) in row_counts(p.vectors()) {
                *merged.entry(k).or_insert(0) += v;
            }
        }
        assert_eq!(merged, row_counts(set.vectors()));
    }

    #[test]
    fn partition_large_alpha_is_near_uniform() {
        let set = gaussian_mixture(&spec(10, 2, 1000, 0.3, 8)).unwrap();
        let parts = dirichlet_partition(&set, 10, 1e6, 4).unwrap();
        for p in &parts {
            let labels = p.labels().unwrap();
            for c in 0..10u32 {
                let frac = labels.iter().filter(|&&l| l == c).count() as f64 / labels.len() as f64;
                assert!((frac - 0.1).abs() < 0.05, "class {c}: {frac}");
            }
        }
    }

    #[test]
    fn partition_errors() {
        let set = gaussian_mixture(&spec(2, 2, 5, 0.3, 1)).unwrap();
        let unlabeled = EmbeddingSet::unlabeled(set.vectors().clone(), "u");
        assert!(matches!(
            dirichlet_partition(&unlabeled, 2, 0.5, 0),
            Err(Error::Unlabeled)
        ));
        assert!(dirichlet_partition(&set, 0, 0.5, 0).is_err());
    }

    #[test]
    fn duplicates_keep_count_and_rows() {
        let set = gaussian_mixture(&spec(2, 3, 5_000, 0.3, 12)).unwrap();
        assert_eq!(inject_duplicates(&set, 1, 0).unwrap(), set);
        let dup = inject_duplicates(&set, 200, 5).unwrap();
        assert_eq!(dup.len(), 10_000);
        let counts = row_counts(dup.vectors());
        assert_eq!(counts.len(), 50);
        let original = row_counts(set.vectors());
        assert!(counts.keys().all(|k| original.contains_key(k)));
    }

    #[test]
    fn duplicates_non_divisible_factor() {
        let set = gaussian_mixture(&spec(1, 2, 10, 0.3, 1)).unwrap();
        let dup = inject_duplicates(&set, 3, 0).unwrap();
        assert_eq!(dup.len(), 10);
        let counts = row_counts(dup.vectors());
        assert_eq!(counts.len(), 4);
        let mut sizes: Vec<usize> = counts.values().copied().collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 3, 3, 3]);
        assert!(inject_duplicates(&set, 0, 0).is_err());
    }

    #[test]
    fn dirichlet_draws_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for alpha in [1e-3, 0.5, 10.0] {
            let p = sample_dirichlet(alpha, 10, &mut rng).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
