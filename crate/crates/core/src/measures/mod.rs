//! Buyer queries, seller-side reports, and the relevance/diversity measures.
//!
//! A seller never shares rows. Given the buyer's `k×d` query `Q` it computes
//! `QC` (with `C = XᵀX / n`) and the projected second moment `S = QCQᵀ`,
//! and reports only those summaries plus a few scalars derived from them.

mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use report::{
    compute_query, default_omega, diversity_robust_volume, project, robust_volume, seller_report, MeasurementReport,
    QueryMatrix, ReportConfig, QUERY_TOL, WIRE_QUERY_TOL,
};

use crate::error::{Error, Result};
use crate::kernel::stats::pearson;
use crate::kernel::{dot, log_det_psd, norm, sym_eigen, Matrix, DEFAULT_JITTER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    L2,
    Cosine,
    Correlation,
    Overlap,
    Volume,
    RobustVolume,
    Vendi,
    Dispersion,
    Difference,
}

/// Which direction of a measurement counts as better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Maximize,
    Minimize,
}

impl Orientation {
    /// Maps a raw value to a score where larger is always better.
    pub fn score(self, value: f64) -> f64 {
        match self {
            Orientation::Maximize => value,
            Orientation::Minimize => -value,
        }
    }
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 9] = [
        MeasureKind::L2,
        MeasureKind::Cosine,
        MeasureKind::Correlation,
        MeasureKind::Overlap,
        MeasureKind::Volume,
        MeasureKind::RobustVolume,
        MeasureKind::Vendi,
        MeasureKind::Dispersion,
        MeasureKind::Difference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::L2 => "l2",
            MeasureKind::Cosine => "cosine",
            MeasureKind::Correlation => "correlation",
            MeasureKind::Overlap => "overlap",
            MeasureKind::Volume => "volume",
            MeasureKind::RobustVolume => "robust_volume",
            MeasureKind::Vendi => "vendi",
            MeasureKind::Dispersion => "dispersion",
            MeasureKind::Difference => "difference",
        }
    }

    /// Relevance kinds compare the two parties; the rest describe the seller.
    pub fn is_relevance(self) -> bool {
        matches!(
            self,
            MeasureKind::L2 | MeasureKind::Cosine | MeasureKind::Correlation | MeasureKind::Overlap
        )
    }

    /// Kinds whose value is a scalar the seller reports directly.
    pub fn is_reported_scalar(self) -> bool {
        matches!(
            self,
            MeasureKind::Volume | MeasureKind::RobustVolume | MeasureKind::Vendi | MeasureKind::Dispersion
        )
    }

    /// Every kind defaults to "higher is better", Difference included;
    /// pass [`Orientation::Minimize`] explicitly to invert it.
    pub fn default_orientation(self) -> Orientation {
        Orientation::Maximize
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown measure kind '{s}'")))
    }
}

fn check_means(b: &MeasurementReport, s: &MeasurementReport) -> Result<()> {
    if b.mean_vector.len() != s.mean_vector.len() {
        return Err(Error::DimensionMismatch {
            expected: b.mean_vector.len(),
            found: s.mean_vector.len(),
        });
    }
    Ok(())
}

fn check_lambdas(b: &MeasurementReport, s: &MeasurementReport) -> Result<()> {
    if b.lambdas.len() != s.lambdas.len() {
        return Err(Error::DimensionMismatch {
            expected: b.lambdas.len(),
            found: s.lambdas.len(),
        });
    }
    Ok(())
}

fn geometric_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v.ln(), n + 1));
    (sum / n as f64).exp()
}

pub fn relevance_l2(b: &MeasurementReport, s: &MeasurementReport) -> Result<f64> {
    check_means(b, s)?;
    let sq: f64 = b
        .mean_vector
        .iter()
        .zip(&s.mean_vector)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(-sq.sqrt())
}

pub fn relevance_cosine(b: &MeasurementReport, s: &MeasurementReport) -> Result<f64> {
    check_means(b, s)?;
    let (nb, ns) = (norm(&b.mean_vector), norm(&s.mean_vector));
    if nb == 0.0 || ns == 0.0 {
        return Err(Error::UndefinedCosine);
    }
    Ok((dot(&b.mean_vector, &s.mean_vector) / (nb * ns)).clamp(-1.0, 1.0))
}

/// Pearson correlation of the two mean vectors over their `d` coordinates.
pub fn relevance_correlation(b: &MeasurementReport, s: &MeasurementReport) -> Result<f64> {
    check_means(b, s)?;
    pearson(&b.mean_vector, &s.mean_vector)
}

/// Geometric mean of `min(λb, λs) / max(λb, λs)`.
pub fn relevance_overlap(b: &MeasurementReport, s: &MeasurementReport) -> Result<f64> {
    check_lambdas(b, s)?;
    if let Some(i) = b
        .lambdas
        .iter()
        .zip(&s.lambdas)
        .position(|(&x, &y)| x <= 0.0 || y <= 0.0)
    {
        return Err(Error::DegenerateComponent(i));
    }
    Ok(geometric_mean(
        b.lambdas.iter().zip(&s.lambdas).map(|(&x, &y)| x.min(y) / x.max(y)),
    ))
}

/// Geometric mean of `|λb − λs| / max(λb, λs)`.
pub fn diversity_difference(b: &MeasurementReport, s: &MeasurementReport) -> Result<f64> {
    check_lambdas(b, s)?;
    if let Some(i) = b.lambdas.iter().zip(&s.lambdas).position(|(&x, &y)| x.max(y) <= 0.0) {
        return Err(Error::DegenerateComponent(i));
    }
    Ok(geometric_mean(
        b.lambdas
            .iter()
            .zip(&s.lambdas)
            .map(|(&x, &y)| (x - y).abs() / x.max(y)),
    ))
}

/// `log det(S + jitter·I)`.
pub fn volume_of(s: &Matrix, jitter: f64) -> Result<f64> {
    log_det_psd(s, jitter)
}

/// Exponential of the entropy of the trace-normalized eigenvalues of `S`.
pub fn vendi_of(s: &Matrix) -> Result<f64> {
    let eig = sym_eigen(s)?;
    let clamped: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroTrace);
    }
    let entropy: f64 = clamped
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp().clamp(1.0, s.rows() as f64))
}

/// Geometric mean of the standard deviations `sqrt(S_ii)`.
pub fn dispersion_of(s: &Matrix) -> Result<f64> {
    let diag = s.diag();
    if let Some(i) = diag.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonpositiveVariance(i));
    }
    Ok(geometric_mean(diag.iter().map(|v| v.sqrt())))
}

pub fn diversity_volume(s: &MeasurementReport) -> Result<f64> {
    volume_of(&s.projected_cov, DEFAULT_JITTER)
}

pub fn diversity_vendi(s: &MeasurementReport) -> Result<f64> {
    vendi_of(&s.projected_cov)
}

pub fn diversity_dispersion(s: &MeasurementReport) -> Result<f64> {
    dispersion_of(&s.projected_cov)
}

/// Measurement of seller report `s` against buyer report `b`.
///
/// Diversity scalars are taken from the seller's report as claimed; the
/// relevance kinds and Difference are computed from the reported statistics.
pub fn evaluate(kind: MeasureKind, b: &MeasurementReport, s: &MeasurementReport) -> Result<f64> {
    match kind {
        MeasureKind::L2 => relevance_l2(b, s),
        MeasureKind::Cosine => relevance_cosine(b, s),
        MeasureKind::Correlation => relevance_correlation(b, s),
        MeasureKind::Overlap => relevance_overlap(b, s),
        MeasureKind::Difference => diversity_difference(b, s),
        MeasureKind::Volume => Ok(s.volume),
        MeasureKind::RobustVolume => Ok(s.robust_volume),
        MeasureKind::Vendi => Ok(s.vendi),
        MeasureKind::Dispersion => Ok(s.dispersion),
    }
}
