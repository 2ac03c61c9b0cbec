//! Straight-from-the-definition reference implementations used as test
//! oracles. Nothing here calls into the library's numeric kernels.

#![allow(dead_code, clippy::needless_range_loop)]

use fedmeasure::dataset::EmbeddingSet;
use fedmeasure::kernel::Matrix;
use fedmeasure::measures::{MeasureKind, QueryMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Dense = Vec<Vec<f64>>;

pub fn dense(m: &Matrix) -> Dense {
    m.to_rows()
}

pub fn transpose(a: &Dense) -> Dense {
    let (r, c) = (a.len(), a[0].len());
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for j in 0..p {
            out[i][j] = (0..m).map(|t| a[i][t] * b[t][j]).sum();
        }
    }
    out
}

/// Full `d×d` second moment, optionally centered, divided by `n`.
pub fn full_moment(x: &Dense, center: bool) -> Dense {
    let (n, d) = (x.len(), x[0].len());
    let mean: Vec<f64> = (0..d)
        .map(|j| {
            if center {
                x.iter().map(|r| r[j]).sum::<f64>() / n as f64
            } else {
                0.0
            }
        })
        .collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in x {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n as f64;
            }
        }
    }
    c
}

/// `ln |det A|` by Gaussian elimination with partial pivoting.
pub fn lu_log_det(a: &Dense) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut total = 0.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, p);
        let piv = m[col][col];
        if piv == 0.0 {
            return f64::NEG_INFINITY;
        }
        total += piv.abs().ln();
        for r in col + 1..n {
            let f = m[r][col] / piv;
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    total
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &Dense) -> Vec<f64> {
    let n = a.len();
    let mut m = a.clone();
    for _ in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Everything a report contains, computed from `C` directly.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub mean_vector: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub s: Dense,
    pub volume: f64,
    pub robust_volume: f64,
    pub vendi: f64,
    pub dispersion: f64,
}

fn add_jitter(a: &Dense, jitter: f64) -> Dense {
    let mut m = a.clone();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += jitter;
    }
    m
}

/// Quantizes projected rows and dedupes with a pairwise scan.
pub fn oracle_robust_volume(y: &Dense, omega: f64, jitter: f64) -> f64 {
    let mut cells: Vec<Vec<i64>> = Vec::new();
    for r in y {
        let cell: Vec<i64> = r.iter().map(|v| (v / omega).floor() as i64).collect();
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    let u: Dense = cells
        .iter()
        .map(|c| c.iter().map(|&i| (i as f64 + 0.5) * omega).collect())
        .collect();
    lu_log_det(&add_jitter(&matmul(&transpose(&u), &u), jitter))
}

pub fn oracle_report(x: &Dense, q: &Dense, center: bool, jitter: f64, omega: f64) -> OracleReport {
    let c = full_moment(x, center);
    let qc = matmul(q, &c);
    let s = matmul(&qc, &transpose(q));
    let (k, d) = (q.len(), q[0].len());
    let mean_vector: Vec<f64> = (0..d)
        .map(|j| qc.iter().map(|r| r[j]).sum::<f64>() / k as f64)
        .collect();
    let lambdas: Vec<f64> = qc.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let ev = jacobi_eigenvalues(&s);
    let tr: f64 = ev.iter().map(|v| v.max(0.0)).sum();
    let h: f64 = ev
        .iter()
        .map(|v| v.max(0.0) / tr)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    let dispersion = ((0..k).map(|i| s[i][i].sqrt().ln()).sum::<f64>() / k as f64).exp();
    let y = matmul(x, &transpose(q));
    OracleReport {
        mean_vector,
        lambdas,
        volume: lu_log_det(&add_jitter(&s, jitter)),
        robust_volume: oracle_robust_volume(&y, omega, jitter),
        vendi: h.exp().clamp(1.0, k as f64),
        dispersion,
        s,
    }
}

pub fn oracle_measure(kind: MeasureKind, b: &OracleReport, s: &OracleReport) -> f64 {
    let (mb, ms) = (&b.mean_vector, &s.mean_vector);
    let d = mb.len() as f64;
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let gm = |xs: Vec<f64>| (xs.iter().map(|v| v.ln()).sum::<f64>() / xs.len() as f64).exp();
    match kind {
        MeasureKind::L2 => -mb.iter().zip(ms).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        MeasureKind::Cosine => dot(mb, ms) / (dot(mb, mb).sqrt() * dot(ms, ms).sqrt()),
        MeasureKind::Correlation => {
            let (ab, as_) = (mb.iter().sum::<f64>() / d, ms.iter().sum::<f64>() / d);
            let cb: Vec<f64> = mb.iter().map(|v| v - ab).collect();
            let cs: Vec<f64> = ms.iter().map(|v| v - as_).collect();
            dot(&cb, &cs) / (dot(&cb, &cb).sqrt() * dot(&cs, &cs).sqrt())
        }
        MeasureKind::Overlap => gm(b
            .lambdas
            .iter()
            .zip(&s.lambdas)
            .map(|(x, y)| x.min(*y) / x.max(*y))
            .collect()),
        MeasureKind::Difference => gm(b
            .lambdas
            .iter()
            .zip(&s.lambdas)
            .map(|(x, y)| (x - y).abs() / x.max(*y))
            .collect()),
        MeasureKind::Volume => s.volume,
        MeasureKind::RobustVolume => s.robust_volume,
        MeasureKind::Vendi => s.vendi,
        MeasureKind::Dispersion => s.dispersion,
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Gaussian data with a random per-set offset, so means are away from zero.
pub fn random_set(n: usize, d: usize, rng: &mut ChaCha8Rng) -> EmbeddingSet {
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..2.0)).collect();
    let data: Vec<f64> = (0..n)
        .flat_map(|_| {
            (0..d)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(rng);
                    offset[j] + scales[j] * z
                })
                .collect::<Vec<_>>()
        })
        .collect();
    EmbeddingSet::unlabeled(Matrix::from_vec(n, d, data).unwrap(), "random")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn query_dense(q: &QueryMatrix) -> Dense {
    dense(q.directions())
}
