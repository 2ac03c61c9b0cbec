use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::scenario::{SellerOverride, Simulation};
use crate::error::{Error, Result};
use crate::kernel::stats::{mean, std_dev};
use crate::measures::{
    compute_query, default_omega, evaluate, seller_report, MeasureKind, MeasurementReport, Orientation, QueryMatrix,
    ReportConfig,
};
use crate::par;

/// `1 / log2(rank + 1)`.
pub fn dcg_of_rank(rank: usize) -> Result<f64> {
    if rank < 1 {
        return Err(Error::InvalidArgument("rank must be >= 1".into()));
    }
    Ok(1.0 / ((rank + 1) as f64).log2())
}

/// Per-kind orientation used when ranking.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Orientations(BTreeMap<MeasureKind, Orientation>);

impl Orientations {
    pub fn set(mut self, kind: MeasureKind, o: Orientation) -> Self {
        self.0.insert(kind, o);
        self
    }

    pub fn get(&self, kind: MeasureKind) -> Orientation {
        self.0.get(&kind).copied().unwrap_or(kind.default_orientation())
    }
}

/// Orders sellers best first. Failed measurements (`None`) go last; equal
/// scores fall back to the lower index. Returns the ordering and the number
/// of adjacent ties among the valid values.
pub fn rank_sellers(values: &[Option<f64>], orientation: Orientation) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    let score = |i: usize| values[i].map(|v| orientation.score(v));
    order.sort_by(|&a, &b| match (score(a), score(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    let ties = order
        .windows(2)
        .filter(|w| matches!((score(w[0]), score(w[1])), (Some(x), Some(y)) if x == y))
        .count();
    (order, ties)
}

/// One trial's raw measurements, indexed `[seller][kind]` in
/// [`MeasureKind::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMeasurements {
    pub trial: usize,
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindRanking {
    pub kind: MeasureKind,
    pub orientation: Orientation,
    /// Seller ordering per trial, best first.
    pub orderings: Vec<Vec<usize>>,
    /// 1-based rank of the IID seller per trial.
    pub iid_ranks: Vec<usize>,
    pub dcg: Vec<f64>,
    pub ties: usize,
    pub warnings: usize,
}

impl KindRanking {
    pub fn mean_dcg(&self) -> f64 {
        mean(&self.dcg)
    }

    pub fn std_dcg(&self) -> f64 {
        std_dev(&self.dcg)
    }

    pub fn mean_rank(&self) -> f64 {
        mean(&self.iid_ranks.iter().map(|&r| r as f64).collect::<Vec<_>>())
    }

    pub fn std_rank(&self) -> f64 {
        std_dev(&self.iid_ranks.iter().map(|&r| r as f64).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub scenario: String,
    pub num_sellers: usize,
    pub iid_seller: usize,
    pub kinds: Vec<KindRanking>,
    pub trials: Vec<TrialMeasurements>,
}

impl RankingResult {
    pub fn kind(&self, kind: MeasureKind) -> &KindRanking {
        self.kinds.iter().find(|k| k.kind == kind).expect("all kinds ranked")
    }
}

/// Buyer query, its omega and the buyer's own report for one trial.
pub(crate) struct BuyerSide {
    pub query: QueryMatrix,
    pub config: ReportConfig,
    pub report: MeasurementReport,
}

pub(crate) fn buyer_side(sim: &Simulation, trial: usize, size: usize) -> Result<BuyerSide> {
    let buyer = sim.buyer_query(trial, size)?;
    let query = compute_query(&buyer, sim.scenario.k)?;
    let config = ReportConfig {
        omega: Some(default_omega(&buyer, &query)?),
        ..ReportConfig::default()
    };
    let report = seller_report(&buyer, &query, &config)?;
    Ok(BuyerSide { query, config, report })
}

/// Every kind's value for one seller report; failures become `None`.
pub(crate) fn measure_all(buyer: &MeasurementReport, seller: &Result<MeasurementReport>) -> Vec<Option<f64>> {
    MeasureKind::ALL
        .iter()
        .map(|&k| match seller {
            Ok(s) => evaluate(k, buyer, s).ok().filter(|v| v.is_finite()),
            Err(_) => None,
        })
        .collect()
}

pub(crate) fn measure_trial(
    sim: &Simulation,
    trial: usize,
    buyer: &BuyerSide,
    over: SellerOverride,
) -> Vec<Vec<Option<f64>>> {
    let reports = par::map(sim.sellers().len(), |j| {
        sim.seller(trial, j, over)
            .and_then(|s| seller_report(&s, &buyer.query, &buyer.config))
    });
    reports.iter().map(|r| measure_all(&buyer.report, r)).collect()
}

/// Ranks every seller under every kind for each trial.
pub fn run_ranking(sim: &Simulation, orientations: &Orientations) -> Result<RankingResult> {
    let sc = &sim.scenario;
    let iid = sc.iid_index()?;
    let mut trials = Vec::with_capacity(sc.trials);
    for t in 0..sc.trials {
        let buyer = buyer_side(sim, t, sc.buyer.query_size)?;
        trials.push(TrialMeasurements {
            trial: t,
            values: measure_trial(sim, t, &buyer, SellerOverride::default()),
        });
    }
    let kinds = MeasureKind::ALL
        .iter()
        .enumerate()
        .map(|(ki, &kind)| {
            let orientation = orientations.get(kind);
            let mut kr = KindRanking {
                kind,
                orientation,
                orderings: Vec::new(),
                iid_ranks: Vec::new(),
                dcg: Vec::new(),
                ties: 0,
                warnings: 0,
            };
            for tm in &trials {
                let column: Vec<Option<f64>> = tm.values.iter().map(|v| v[ki]).collect();
                kr.warnings += column.iter().filter(|v| v.is_none()).count();
                let (order, ties) = rank_sellers(&column, orientation);
                let rank = order.iter().position(|&j| j == iid).expect("permutation") + 1;
                kr.ties += ties;
                kr.iid_ranks.push(rank);
                kr.dcg.push(dcg_of_rank(rank)?);
                kr.orderings.push(order);
            }
            Ok(kr)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankingResult {
        scenario: sc.name.clone(),
        num_sellers: sim.sellers().len(),
        iid_seller: iid,
        kinds,
        trials,
    })
}
