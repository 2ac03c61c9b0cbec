use crate::error::{Error, Result};
use crate::kernel::eigen::sym_eigen;
use crate::kernel::matrix::{axpy, dot, Matrix};
use crate::kernel::stats::second_moment;

/// Top-`k` principal directions of the mean-centered rows of `x`, as a `k×d`
/// matrix with orthonormal rows ordered by descending explained variance.
///
/// When `n < d` the decomposition runs on the `n×n` Gram matrix of the
/// centered data instead of the `d×d` covariance; both have the same nonzero
/// spectrum. Directions beyond the data's rank are completed with an
/// orthonormal complement. Each row is signed so its largest-magnitude entry
/// is positive.
pub fn top_k_directions(x: &Matrix, k: usize) -> Result<Matrix> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={} for a {n}x{d} dataset",
            n.min(d)
        )));
    }
    let mut rows = if n >= d {
        primal_directions(x, k)?
    } else {
        dual_directions(x, k)?
    };
    complete_orthonormal(&mut rows, k, d);
    for r in rows.iter_mut() {
        fix_sign(r);
    }
    Matrix::from_rows(&rows)
}

fn primal_directions(x: &Matrix, k: usize) -> Result<Vec<Vec<f64>>> {
    let cov = second_moment(x, true, true)?;
    let spec = sym_eigen(&cov)?;
    let top = spec.eigenvalues[0].max(0.0);
    Ok((0..k)
        .filter(|&j| spec.eigenvalues[j] > 1e-12 * top)
        .map(|j| spec.eigenvector(j))
        .collect())
}

fn dual_directions(x: &Matrix, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = x.rows();
    let xc = x.centered();
    let gram = xc.matmul_t(&xc)?.scale(1.0 / n as f64);
    let spec = sym_eigen(&gram)?;
    let top = spec.eigenvalues[0].max(0.0);
    let mut rows = Vec::with_capacity(k);
    for j in 0..k {
        let mu = spec.eigenvalues[j];
        if mu <= 1e-12 * top {
            break;
        }
        let u = spec.eigenvector(j);
        let mut v = vec![0.0; x.cols()];
        for (i, &ui) in u.iter().enumerate() {
            axpy(ui, xc.row(i), &mut v);
        }
        rows.push(v);
    }
    // the lift Xᵀu is only orthogonal up to the conditioning of the Gram
    // spectrum; re-orthonormalize and drop anything that collapsed
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for v in rows {
        if let Some(v) = orthonormalize_against(v, &out) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Modified Gram-Schmidt step; `None` if `v` is (numerically) in the span.
pub(crate) fn orthonormalize_against(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let start = dot(&v, &v).sqrt();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let p = dot(&v, b);
            axpy(-p, b, &mut v);
        }
    }
    let nrm = dot(&v, &v).sqrt();
    if nrm <= 1e-10 * start {
        return None;
    }
    v.iter_mut().for_each(|e| *e /= nrm);
    Some(v)
}

fn complete_orthonormal(rows: &mut Vec<Vec<f64>>, k: usize, d: usize) {
    let mut axis = 0;
    while rows.len() < k && axis < d {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        if let Some(v) = orthonormalize_against(e, rows) {
            rows.push(v);
        }
        axis += 1;
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `‖Q Qᵀ − I‖_max` for a row-orthonormal candidate.
pub fn orthonormality_error(q: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..q.rows() {
        for j in i..q.rows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(q.row(i), q.row(j)) - target).abs());
        }
    }
    worst
}
