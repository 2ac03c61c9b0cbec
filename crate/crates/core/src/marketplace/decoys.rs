use std::collections::BTreeMap;

use super::scenario::{SellerOverride, Simulation, DECOYS, ORDER};
use crate::error::Result;
use crate::kernel::quantile;
use crate::measures::{compute_query, MeasureKind};
use crate::par;
use crate::protocol::{answer, make_decoys, screen_seller, DecoyPlan, ServeConfig};

/// Screen outcome for one (trial, seller, kind).
#[derive(Debug, Clone, PartialEq)]
pub struct DecoyRow {
    pub trial: usize,
    pub seller: usize,
    pub kind: MeasureKind,
    /// `None` when the measurement or ratio was undefined.
    pub ratio: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecoyTable {
    pub rows: Vec<DecoyRow>,
}

impl DecoyTable {
    /// Median ratio across trials for one seller and kind.
    pub fn median_ratio(&self, seller: usize, kind: MeasureKind) -> Option<f64> {
        let xs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.seller == seller && r.kind == kind)
            .filter_map(|r| r.ratio)
            .collect();
        quantile(&xs, 0.5).ok()
    }

    pub fn acceptance_rate(&self, seller: usize, kind: MeasureKind) -> f64 {
        let rows: Vec<&DecoyRow> = self
            .rows
            .iter()
            .filter(|r| r.seller == seller && r.kind == kind)
            .collect();
        if rows.is_empty() {
            return f64::NAN;
        }
        rows.iter().filter(|r| r.accepted).count() as f64 / rows.len() as f64
    }
}

/// Screens every scenario seller with decoy queries, in process but through
/// the wire message format.
///
/// Foreign decoys draw from every world dataset other than the buyer's.
pub fn run_decoy_experiment(sim: &Simulation, plan: &DecoyPlan) -> Result<DecoyTable> {
    let sc = &sim.scenario;
    let foreign_ids: Vec<usize> = (0..sc.world.num_datasets).filter(|&d| d != sc.buyer.dataset).collect();
    let mut table = DecoyTable::default();
    for t in 0..sc.trials {
        let buyer = sim.buyer_query(t, sc.buyer.query_size)?;
        let real = compute_query(&buyer, sc.k)?;
        let foreign = foreign_ids
            .iter()
            .map(|&d| sim.foreign(t, d, sc.buyer.query_size))
            .collect::<Result<Vec<_>>>()?;
        let decoys = make_decoys(&buyer, sc.k, plan, &foreign, sim.seed(&[DECOYS, t as u64]))?;
        let results = par::map(sim.sellers().len(), |j| -> Result<_> {
            let seller = sim.seller(t, j, SellerOverride::default())?;
            let config = ServeConfig {
                seller_id: format!("seller{j}"),
                ..ServeConfig::default()
            };
            screen_seller(
                &buyer,
                &real,
                &decoys,
                &MeasureKind::ALL,
                plan,
                sim.seed(&[ORDER, t as u64, j as u64]),
                |msg| answer(&seller, &config, msg),
            )
        });
        for (j, res) in results.into_iter().enumerate() {
            let outcomes: BTreeMap<_, _> = match res {
                Ok(r) => r.outcomes.into_iter().map(|(k, o)| (k, o.ok())).collect(),
                Err(_) => MeasureKind::ALL.iter().map(|&k| (k, None)).collect(),
            };
            for (kind, o) in outcomes {
                table.rows.push(DecoyRow {
                    trial: t,
                    seller: j,
                    kind,
                    ratio: o.map(|o| o.ratio),
                    accepted: o.is_some_and(|o| o.accepted),
                });
            }
        }
    }
    Ok(table)
}
