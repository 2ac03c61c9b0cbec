//! Decoy queries and the honesty screen.
//!
//! A buyer hides its real query among decoys built from unrelated data or
//! random directions. An honest seller's measurement under the real query
//! should stand out from its measurements under the decoys; a seller that
//! inflates every answer does not.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::wire::{QueryMessage, ReportMessage};
use crate::dataset::EmbeddingSet;
use crate::error::{Error, Result};
use crate::kernel::pca::{fix_sign, orthonormalize_against};
use crate::kernel::{quantile, top_k_directions, Matrix};
use crate::measures::{
    default_omega, evaluate, seller_report, MeasureKind, MeasurementReport, Orientation, QueryMatrix, ReportConfig,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyStrategy {
    RandomDirections,
    ShuffledBuyer,
    ForeignDataset,
}

impl DecoyStrategy {
    pub fn name(self) -> &'static str {
        match self {
            DecoyStrategy::RandomDirections => "random_directions",
            DecoyStrategy::ShuffledBuyer => "shuffled_buyer",
            DecoyStrategy::ForeignDataset => "foreign_dataset",
        }
    }
}

impl fmt::Display for DecoyStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoyStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            DecoyStrategy::RandomDirections,
            DecoyStrategy::ShuffledBuyer,
            DecoyStrategy::ForeignDataset,
        ]
        .into_iter()
        .find(|d| d.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown decoy strategy '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoyPlan {
    pub num_decoys: usize,
    /// Used round-robin across decoys.
    pub strategies: Vec<DecoyStrategy>,
    pub quantile: f64,
    pub threshold: f64,
}

impl Default for DecoyPlan {
    fn default() -> Self {
        DecoyPlan {
            num_decoys: 19,
            strategies: vec![DecoyStrategy::RandomDirections],
            quantile: 0.75,
            threshold: 1.2,
        }
    }
}

impl DecoyPlan {
    pub fn validate(&self) -> Result<()> {
        if self.num_decoys < 1 {
            return Err(Error::InvalidArgument("decoy plan needs at least one decoy".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidArgument("decoy plan needs a strategy".into()));
        }
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(Error::InvalidArgument(format!(
                "quantile {} outside [0, 1]",
                self.quantile
            )));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// A decoy query plus the data the buyer measures it against.
///
/// Comparing a seller's decoy report with the buyer's own data under the
/// same decoy would mostly measure how the decoy subspace treats two samples
/// of one distribution; the reference is instead the data the decoy was built
/// from (the buyer itself for random directions).
#[derive(Debug, Clone)]
pub struct Decoy {
    pub strategy: DecoyStrategy,
    pub query: QueryMatrix,
    pub reference: EmbeddingSet,
}

/// Uniformly random orthonormal `k×d` frame.
pub fn random_frame<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Result<Matrix> {
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {k} orthonormal rows in R^{d}"
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    while rows.len() < k {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(mut v) = orthonormalize_against(v, &rows) {
            fix_sign(&mut v);
            rows.push(v);
        }
    }
    Matrix::from_rows(&rows)
}

fn shuffle_columns<R: Rng + ?Sized>(x: &Matrix, rng: &mut R) -> Matrix {
    let (n, d) = x.shape();
    let mut out = vec![0.0; n * d];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (i, &src) in perm.iter().enumerate() {
            out[i * d + j] = x.get(src, j);
        }
    }
    Matrix::from_vec(n, d, out).expect("shape preserved")
}

/// Builds `plan.num_decoys` decoys for a `k`-direction query.
///
/// `foreign` supplies the unrelated datasets for the foreign strategy; the
/// i-th foreign decoy uses `foreign[i % len]`, subsampled to the buyer's size.
pub fn make_decoys(
    buyer: &EmbeddingSet,
    k: usize,
    plan: &DecoyPlan,
    foreign: &[EmbeddingSet],
    seed: u64,
) -> Result<Vec<Decoy>> {
    plan.validate()?;
    if plan.strategies.contains(&DecoyStrategy::ForeignDataset) && foreign.is_empty() {
        return Err(Error::InvalidArgument(
            "foreign_dataset decoys need an unrelated dataset".into(),
        ));
    }
    let mut foreign_used = 0;
    let mut out = Vec::with_capacity(plan.num_decoys);
    for i in 0..plan.num_decoys {
        let strategy = plan.strategies[i % plan.strategies.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
        let id = format!("decoy-{i}");
        let decoy = match strategy {
            DecoyStrategy::RandomDirections => Decoy {
                strategy,
                query: QueryMatrix::new(random_frame(k, buyer.dim(), &mut rng)?, id)?,
                reference: buyer.clone(),
            },
            DecoyStrategy::ShuffledBuyer => {
                let shuffled = EmbeddingSet::unlabeled(shuffle_columns(buyer.vectors(), &mut rng), "shuffled");
                Decoy {
                    strategy,
                    query: QueryMatrix::new(top_k_directions(shuffled.vectors(), k)?, id)?,
                    reference: shuffled,
                }
            }
            DecoyStrategy::ForeignDataset => {
                let src = &foreign[foreign_used % foreign.len()];
                foreign_used += 1;
                if src.dim() != buyer.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: buyer.dim(),
                        found: src.dim(),
                    });
                }
                let take = buyer.len().min(src.len());
                let mut idx: Vec<usize> = (0..src.len()).collect();
                idx.shuffle(&mut rng);
                idx.truncate(take);
                let sample = src.select(&idx);
                Decoy {
                    strategy,
                    query: QueryMatrix::new(top_k_directions(sample.vectors(), k)?, id)?,
                    reference: sample,
                }
            }
        };
        out.push(decoy);
    }
    Ok(out)
}

/// `mu_real / quantile(mu_false, q)`.
pub fn decoy_ratio(mu_real: f64, mu_false: &[f64], q: f64) -> Result<f64> {
    if mu_false.is_empty() {
        return Err(Error::InvalidArgument("no decoy measurements".into()));
    }
    let denom = quantile(mu_false, q)?;
    if denom == 0.0 {
        return Err(Error::DegenerateDecoy);
    }
    Ok(mu_real / denom)
}

/// Buyer-side and seller-side reports for one query.
#[derive(Debug, Clone)]
pub struct ReportPair {
    pub buyer: MeasurementReport,
    pub seller: MeasurementReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenOutcome {
    pub accepted: bool,
    pub ratio: f64,
}

/// Orientation used when screening: Difference shrinks for an honest seller
/// under the real query, so its comparison is inverted.
pub fn screen_orientation(kind: MeasureKind) -> Orientation {
    match kind {
        MeasureKind::Difference => Orientation::Minimize,
        _ => Orientation::Maximize,
    }
}

/// Applies the decoy ratio test for one kind.
///
/// With [`Orientation::Maximize`] the seller passes when the ratio is at
/// least `plan.threshold`; with [`Orientation::Minimize`] when it is at most
/// `1 / plan.threshold`.
pub fn honesty_screen(
    real: &ReportPair,
    decoys: &[ReportPair],
    kind: MeasureKind,
    orientation: Orientation,
    plan: &DecoyPlan,
) -> Result<ScreenOutcome> {
    if decoys.is_empty() {
        return Err(Error::InvalidArgument("honesty screen needs decoy reports".into()));
    }
    let mu_real = evaluate(kind, &real.buyer, &real.seller)?;
    let mu_false = decoys
        .iter()
        .map(|p| evaluate(kind, &p.buyer, &p.seller))
        .collect::<Result<Vec<_>>>()?;
    let ratio = decoy_ratio(mu_real, &mu_false, plan.quantile)?;
    let accepted = match orientation {
        Orientation::Maximize => ratio >= plan.threshold,
        Orientation::Minimize => ratio <= 1.0 / plan.threshold,
    };
    Ok(ScreenOutcome { accepted, ratio })
}

/// Result of screening one seller across kinds.
#[derive(Debug)]
pub struct ScreeningResult {
    pub real: ReportPair,
    pub decoys: Vec<ReportPair>,
    pub outcomes: BTreeMap<MeasureKind, Result<ScreenOutcome>>,
}

/// Sends the real query and all decoys through `transport` in a seeded
/// random order, each under a fresh random id, then screens every kind.
///
/// `transport` is anything that turns a query message into the seller's
/// report: a network client or an in-process seller.
pub fn screen_seller<F>(
    buyer: &EmbeddingSet,
    real: &QueryMatrix,
    decoys: &[Decoy],
    kinds: &[MeasureKind],
    plan: &DecoyPlan,
    seed: u64,
    mut transport: F,
) -> Result<ScreeningResult>
where
    F: FnMut(&QueryMessage) -> Result<ReportMessage>,
{
    plan.validate()?;
    if decoys.is_empty() {
        return Err(Error::InvalidArgument("screening needs at least one decoy".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ReportConfig::default();

    // slot 0 is the real query
    let mut slots: Vec<(QueryMatrix, &EmbeddingSet)> = Vec::with_capacity(decoys.len() + 1);
    slots.push((real.clone(), buyer));
    slots.extend(decoys.iter().map(|d| (d.query.clone(), &d.reference)));
    let mut order: Vec<usize> = (0..slots.len()).collect();
    order.shuffle(&mut rng);

    let mut pairs: Vec<Option<ReportPair>> = vec![None; slots.len()];
    for &slot in &order {
        let (q, reference) = &slots[slot];
        let id = format!("{:016x}", rng.random::<u64>());
        let q = q.clone().with_id(id.clone());
        let omega = default_omega(reference, &q)?;
        let buyer_report = seller_report(
            reference,
            &q,
            &ReportConfig {
                omega: Some(omega),
                ..cfg
            },
        )?;
        let msg = QueryMessage::from_query(&q, &[], Some(omega));
        let reply = transport(&msg)?;
        if reply.query_id != id {
            return Err(Error::Schema(format!(
                "reply id '{}' does not match '{id}'",
                reply.query_id
            )));
        }
        pairs[slot] = Some(ReportPair {
            buyer: buyer_report,
            seller: reply.to_report()?,
        });
    }
    let mut pairs = pairs.into_iter().map(|p| p.expect("every slot queried"));
    let real_pair = pairs.next().expect("real slot");
    let decoy_pairs: Vec<ReportPair> = pairs.collect();
    let outcomes = kinds
        .iter()
        .map(|&k| {
            (
                k,
                honesty_screen(&real_pair, &decoy_pairs, k, screen_orientation(k), plan),
            )
        })
        .collect();
    Ok(ScreeningResult {
        real: real_pair,
        decoys: decoy_pairs,
        outcomes,
    })
}
