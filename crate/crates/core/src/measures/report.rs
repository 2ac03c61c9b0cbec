use std::collections::HashSet;

use super::{dispersion_of, vendi_of, volume_of};
use crate::dataset::EmbeddingSet;
use crate::error::{Error, Result};
use crate::kernel::matrix::axpy;
use crate::kernel::{log_det_psd, orthonormality_error, quantile, top_k_directions, Matrix, DEFAULT_JITTER};

/// Orthonormality tolerance for locally constructed queries.
pub const QUERY_TOL: f64 = 1e-8;
/// Looser tolerance for queries decoded from the wire.
pub const WIRE_QUERY_TOL: f64 = 1e-6;

/// `k×d` projection with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMatrix {
    directions: Matrix,
    pub query_id: String,
}

impl QueryMatrix {
    pub fn new(directions: Matrix, query_id: impl Into<String>) -> Result<Self> {
        Self::with_tolerance(directions, query_id, QUERY_TOL)
    }

    pub fn with_tolerance(directions: Matrix, query_id: impl Into<String>, tol: f64) -> Result<Self> {
        if directions.rows() == 0 || directions.rows() > directions.cols() {
            return Err(Error::InvalidQuery(format!(
                "shape {}x{} needs 1 <= k <= d",
                directions.rows(),
                directions.cols()
            )));
        }
        let err = orthonormality_error(&directions);
        if !(err < tol) {
            return Err(Error::InvalidQuery(format!(
                "rows not orthonormal (max deviation {err:.3e})"
            )));
        }
        Ok(QueryMatrix {
            directions,
            query_id: query_id.into(),
        })
    }

    pub fn directions(&self) -> &Matrix {
        &self.directions
    }

    pub fn k(&self) -> usize {
        self.directions.rows()
    }

    pub fn dim(&self) -> usize {
        self.directions.cols()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.query_id = id.into();
        self
    }
}

/// Top-`k` principal directions of the buyer's data.
pub fn compute_query(buyer: &EmbeddingSet, k: usize) -> Result<QueryMatrix> {
    if buyer.len() < k {
        return Err(Error::InvalidArgument(format!(
            "buyer has {} points, need at least k = {k}",
            buyer.len()
        )));
    }
    QueryMatrix::new(top_k_directions(buyer.vectors(), k)?, "query")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    /// Use the centered covariance instead of the uncentered second moment.
    pub center: bool,
    pub jitter: f64,
    /// Robust-volume cell width; `None` derives one from the seller's data.
    pub omega: Option<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            center: false,
            jitter: DEFAULT_JITTER,
            omega: None,
        }
    }
}

/// Everything a seller returns for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementReport {
    /// Mean of the `k` rows of `QC` (length `d`).
    pub mean_vector: Vec<f64>,
    /// Row norms of `QC` (length `k`).
    pub lambdas: Vec<f64>,
    /// `S = QCQᵀ` (k×k).
    pub projected_cov: Matrix,
    pub volume: f64,
    pub robust_volume: f64,
    pub vendi: f64,
    pub dispersion: f64,
    pub n_points: usize,
}

impl MeasurementReport {
    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    pub fn dim(&self) -> usize {
        self.mean_vector.len()
    }

    #[cfg(test)]
    pub(crate) fn placeholder(k: usize, d: usize) -> Self {
        MeasurementReport {
            mean_vector: vec![1.0; d],
            lambdas: vec![1.0; k],
            projected_cov: Matrix::identity(k),
            volume: 0.0,
            robust_volume: 0.0,
            vendi: 1.0,
            dispersion: 1.0,
            n_points: 1,
        }
    }
}

fn check_dim(set: &EmbeddingSet, q: &QueryMatrix) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if set.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: set.dim(),
        });
    }
    Ok(())
}

/// `Y = X Qᵀ` (n×k).
pub fn project(set: &EmbeddingSet, q: &QueryMatrix) -> Result<Matrix> {
    check_dim(set, q)?;
    set.vectors().matmul_t(q.directions())
}

/// Computes the seller's report in `O(n·d·k)` without forming `C`.
///
/// With `Y = XQᵀ`: `QC = YᵀX / n` and `S = YᵀY / n`.
pub fn seller_report(seller: &EmbeddingSet, q: &QueryMatrix, config: &ReportConfig) -> Result<MeasurementReport> {
    let y = project(seller, q)?;
    let x = seller.vectors();
    let (n, d) = x.shape();
    let k = q.k();
    let inv_n = 1.0 / n as f64;

    let mut qc = vec![0.0; k * d];
    let mut s = vec![0.0; k * k];
    for (xi, yi) in x.row_iter().zip(y.row_iter()) {
        for (a, &ya) in yi.iter().enumerate() {
            if ya != 0.0 {
                axpy(ya, xi, &mut qc[a * d..(a + 1) * d]);
                axpy(ya, &yi[a..], &mut s[a * k + a..(a + 1) * k]);
            }
        }
    }
    qc.iter_mut().for_each(|v| *v *= inv_n);
    for a in 0..k {
        for b in a..k {
            let v = s[a * k + b] * inv_n;
            s[a * k + b] = v;
            s[b * k + a] = v;
        }
    }
    if config.center {
        let m = x.col_mean();
        let qm = y.col_mean();
        for a in 0..k {
            axpy(-qm[a], &m, &mut qc[a * d..(a + 1) * d]);
            for b in 0..k {
                s[a * k + b] -= qm[a] * qm[b];
            }
        }
    }
    let qc = Matrix::from_vec(k, d, qc)?;
    let projected_cov = Matrix::from_vec(k, k, s)?;

    let mut mean_vector = vec![0.0; d];
    for row in qc.row_iter() {
        axpy(1.0 / k as f64, row, &mut mean_vector);
    }
    let lambdas = qc.row_iter().map(crate::kernel::norm).collect();
    let omega = match config.omega {
        Some(w) => w,
        None => omega_from_projection(&y)?,
    };
    Ok(MeasurementReport {
        mean_vector,
        lambdas,
        volume: volume_of(&projected_cov, config.jitter)?,
        robust_volume: robust_volume(&y, omega, config.jitter)?,
        vendi: vendi_of(&projected_cov)?,
        dispersion: dispersion_of(&projected_cov)?,
        projected_cov,
        n_points: n,
    })
}

fn omega_from_projection(y: &Matrix) -> Result<f64> {
    let (n, k) = y.shape();
    let mean = y.col_mean();
    let mut var = vec![0.0; k];
    for r in y.row_iter() {
        for ((v, &a), &m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (a - m) * (a - m);
        }
    }
    let stds: Vec<f64> = var.iter().map(|v| (v / n as f64).sqrt()).collect();
    let omega = 0.1 * quantile(&stds, 0.5)?;
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(
            "projected data has no spread; cannot derive a quantization width".into(),
        ));
    }
    Ok(omega)
}

/// `0.1 ×` the median per-direction standard deviation of the projected
/// buyer data.
pub fn default_omega(buyer: &EmbeddingSet, q: &QueryMatrix) -> Result<f64> {
    omega_from_projection(&project(buyer, q)?)
}

/// `log det(UᵀU + jitter·I)` over the distinct grid cells hit by the rows of
/// `y`, each represented by its cell centre.
pub fn robust_volume(y: &Matrix, omega: f64, jitter: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    let k = y.cols();
    let mut seen: HashSet<Vec<i64>> = HashSet::with_capacity(y.rows());
    let mut gram = vec![0.0; k * k];
    let mut centre = vec![0.0; k];
    for r in y.row_iter() {
        let cell: Vec<i64> = r.iter().map(|v| (v / omega).floor() as i64).collect();
        if !seen.insert(cell.clone()) {
            continue;
        }
        for (c, &i) in centre.iter_mut().zip(&cell) {
            *c = (i as f64 + 0.5) * omega;
        }
        for a in 0..k {
            axpy(centre[a], &centre[a..], &mut gram[a * k + a..(a + 1) * k]);
        }
    }
    for a in 0..k {
        for b in a + 1..k {
            gram[b * k + a] = gram[a * k + b];
        }
    }
    log_det_psd(&Matrix::from_vec(k, k, gram)?, jitter)
}

pub fn diversity_robust_volume(seller: &EmbeddingSet, q: &QueryMatrix, omega: f64) -> Result<f64> {
    robust_volume(&project(seller, q)?, omega, DEFAULT_JITTER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::inject_duplicates;
    use crate::kernel::dot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_set(n: usize, d: usize, seed: u64) -> EmbeddingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.5 + z
            })
            .collect();
        EmbeddingSet::unlabeled(Matrix::from_vec(n, d, data).unwrap(), "r")
    }

    #[test]
    fn query_spans_low_rank_subspace() {
        // 3-dim subspace of R^6
        let basis = random_set(3, 6, 1);
        let coeffs = random_set(40, 3, 2);
        let x = coeffs.vectors().matmul(basis.vectors()).unwrap();
        let set = EmbeddingSet::unlabeled(x.clone(), "b");
        let q = compute_query(&set, 3).unwrap();
        let centered = x.centered();
        for r in centered.row_iter() {
            let mut resid = r.to_vec();
            for dir in q.directions().row_iter() {
                axpy(-dot(r, dir), dir, &mut resid);
            }
            assert!(crate::kernel::norm(&resid) < 1e-6);
        }
    }

    #[test]
    fn compute_query_needs_k_points() {
        assert!(compute_query(&random_set(3, 8, 0), 4).is_err());
    }

    #[test]
    fn self_report_basics() {
        let set = random_set(300, 12, 3);
        let q = compute_query(&set, 4).unwrap();
        let r = seller_report(&set, &q, &ReportConfig::default()).unwrap();
        assert_eq!(r.n_points, 300);
        assert!((1.0..=4.0).contains(&r.vendi));
        assert!(r.lambdas.iter().all(|&l| l >= 0.0));
        assert_eq!(super::super::relevance_overlap(&r, &r).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let q = compute_query(&random_set(20, 5, 1), 2).unwrap();
        let err = seller_report(&random_set(20, 6, 1), &q, &ReportConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 5, found: 6 }));
    }

    #[test]
    fn scaling_data_shifts_volume_and_dispersion() {
        let set = random_set(200, 8, 5);
        let q = compute_query(&set, 3).unwrap();
        let cfg = ReportConfig {
            omega: Some(0.1),
            ..ReportConfig::default()
        };
        let r1 = seller_report(&set, &q, &cfg).unwrap();
        let scaled = EmbeddingSet::unlabeled(set.vectors().scale(2.0), "s");
        let r2 = seller_report(&scaled, &q, &cfg).unwrap();
        assert!((r2.volume - r1.volume - 6.0 * 2f64.ln()).abs() < 1e-8);
        assert!((r2.dispersion / r1.dispersion - 2.0).abs() < 1e-12);
    }

    #[test]
    fn robust_volume_identical_rows() {
        let y = Matrix::from_rows(&[[0.33], [0.33], [0.33]]).unwrap();
        let v = robust_volume(&y, 0.1, 1e-10).unwrap();
        assert!((v - (0.35f64 * 0.35 + 1e-10).ln()).abs() < 1e-12);
        assert!(robust_volume(&y, 0.0, 1e-10).is_err());
    }

    #[test]
    fn robust_volume_penalizes_duplicates() {
        let set = random_set(500, 6, 9);
        let q = compute_query(&set, 3).unwrap();
        let omega = default_omega(&set, &q).unwrap();
        let base = diversity_robust_volume(&set, &q, omega).unwrap();
        let dup = inject_duplicates(&set, 2, 1).unwrap();
        assert!(diversity_robust_volume(&dup, &q, omega).unwrap() < base);
    }

    #[test]
    fn centered_mode_matches_centered_data() {
        let set = random_set(100, 6, 4);
        let q = compute_query(&set, 3).unwrap();
        let cfg = ReportConfig {
            center: true,
            omega: Some(0.2),
            ..ReportConfig::default()
        };
        let r = seller_report(&set, &q, &cfg).unwrap();
        let centered = EmbeddingSet::unlabeled(set.vectors().centered(), "c");
        let plain = ReportConfig {
            omega: Some(0.2),
            ..ReportConfig::default()
        };
        let rc = seller_report(&centered, &q, &plain).unwrap();
        assert!(r.projected_cov.sub(&rc.projected_cov).unwrap().max_abs() < 1e-12);
        for (a, b) in r.mean_vector.iter().zip(&rc.mean_vector) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
