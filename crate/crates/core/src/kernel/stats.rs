use crate::error::{Error, Result};
use crate::kernel::eigen::{check_symmetric, sym_eigen};
use crate::kernel::matrix::{axpy, Matrix};

/// Default diagonal jitter for log-determinants of projected covariances.
pub const DEFAULT_JITTER: f64 = 1e-10;

/// `XᵀX` (d×d), optionally mean-centered first and/or divided by `n`.
pub fn second_moment(x: &Matrix, center: bool, normalize: bool) -> Result<Matrix> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }
    let mean = if center { x.col_mean() } else { vec![0.0; d] };
    let mut acc = vec![0.0; d * d];
    let mut row = vec![0.0; d];
    for r in x.row_iter() {
        for ((dst, &v), &m) in row.iter_mut().zip(r).zip(&mean) {
            *dst = v - m;
        }
        // upper triangle only, mirrored below
        for i in 0..d {
            let xi = row[i];
            if xi != 0.0 {
                axpy(xi, &row[i..], &mut acc[i * d + i..(i + 1) * d]);
            }
        }
    }
    let scale = if normalize { 1.0 / n as f64 } else { 1.0 };
    for i in 0..d {
        for j in i..d {
            let v = acc[i * d + j] * scale;
            acc[i * d + j] = v;
            acc[j * d + i] = v;
        }
    }
    Matrix::from_vec(d, d, acc)
}

/// `log det(S + jitter·I)` for a symmetric positive-semidefinite `S`.
///
/// Eigenvalues below `-1e-8·‖S‖₂` are rejected; smaller negative round-off is
/// clamped to zero. With `jitter == 0` a singular `S` yields `-inf`.
pub fn log_det_psd(s: &Matrix, jitter: f64) -> Result<f64> {
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "jitter must be a finite nonnegative number, got {jitter}"
        )));
    }
    check_symmetric(s)?;
    let spec = sym_eigen(s)?;
    let norm = spec.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut total = 0.0;
    for &lam in &spec.eigenvalues {
        if lam < -1e-8 * norm {
            return Err(Error::NotPsd(lam));
        }
        total += (lam.max(0.0) + jitter).ln();
    }
    Ok(total)
}

/// Linear-interpolation quantile at fractional index `q·(m-1)` of the
/// sorted values.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty list".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("quantile input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Sample Pearson correlation of paired sequences.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two pairs".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
