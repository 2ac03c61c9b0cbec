use super::ranking::{buyer_side, measure_trial};
use super::scenario::{SellerOverride, Simulation};
use crate::dataset::{Corruption, MAX_SEVERITY};
use crate::error::{Error, Result};
use crate::kernel::stats::{mean, std_dev};
use crate::measures::MeasureKind;

/// `[seller][kind]` values from one trial.
type TrialValues = Vec<Vec<Option<f64>>>;

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Name of the varied parameter, e.g. `duplication` or `noise:gaussian`.
    pub sweep: String,
    pub value: f64,
    /// Seller index, or `None` for the across-seller average.
    pub seller: Option<usize>,
    pub kind: MeasureKind,
    pub mean: f64,
    pub std: f64,
    /// Trials that produced a value.
    pub trials: usize,
    /// Trials whose measurement failed.
    pub warnings: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, sweep: &str, value: f64, seller: Option<usize>, kind: MeasureKind) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.sweep == sweep && r.value == value && r.seller == seller && r.kind == kind)
    }

    /// Means of the `(sweep, seller, kind)` line in sweep-value order.
    pub fn line(&self, sweep: &str, seller: Option<usize>, kind: MeasureKind) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.sweep == sweep && r.seller == seller && r.kind == kind)
            .map(|r| (r.value, r.mean))
            .collect()
    }
}

/// Aggregates `values[trial][seller][kind]` for one sweep value into
/// per-seller rows plus an across-seller average row.
fn summarize(sweep: &str, value: f64, values: &[Vec<Vec<Option<f64>>>], out: &mut SweepTable) {
    let sellers = values.first().map_or(0, Vec::len);
    for (ki, &kind) in MeasureKind::ALL.iter().enumerate() {
        for j in 0..sellers {
            let xs: Vec<f64> = values.iter().filter_map(|t| t[j][ki]).collect();
            out.rows.push(SweepRow {
                sweep: sweep.to_string(),
                value,
                seller: Some(j),
                kind,
                mean: mean(&xs),
                std: std_dev(&xs),
                trials: xs.len(),
                warnings: values.len() - xs.len(),
            });
        }
        // per-trial average over the sellers that produced a value
        let per_trial: Vec<f64> = values
            .iter()
            .filter_map(|t| {
                let xs: Vec<f64> = t.iter().filter_map(|s| s[ki]).collect();
                (xs.len() == sellers).then(|| mean(&xs))
            })
            .collect();
        out.rows.push(SweepRow {
            sweep: sweep.to_string(),
            value,
            seller: None,
            kind,
            mean: mean(&per_trial),
            std: std_dev(&per_trial),
            trials: per_trial.len(),
            warnings: values.len() - per_trial.len(),
        });
    }
}

/// Measures every seller with each duplication factor applied.
///
/// Within a trial all factors start from the same base sample.
pub fn run_duplicate_sweep(sim: &Simulation, factors: &[usize]) -> Result<SweepTable> {
    if factors.iter().any(|&f| f < 1) {
        return Err(Error::InvalidArgument("duplication factors must be >= 1".into()));
    }
    let sc = &sim.scenario;
    let mut per_factor: Vec<Vec<TrialValues>> = vec![Vec::new(); factors.len()];
    for t in 0..sc.trials {
        let buyer = buyer_side(sim, t, sc.buyer.query_size)?;
        for (fi, &f) in factors.iter().enumerate() {
            let over = SellerOverride {
                duplication: Some(f),
                ..SellerOverride::default()
            };
            per_factor[fi].push(measure_trial(sim, t, &buyer, over));
        }
    }
    let mut table = SweepTable::default();
    for (fi, &f) in factors.iter().enumerate() {
        summarize("duplication", f as f64, &per_factor[fi], &mut table);
    }
    Ok(table)
}

/// Measures every seller at severities `0..=5` of each corruption kind;
/// severity 0 is the uncorrupted baseline.
pub fn run_noise_sweep(sim: &Simulation, kinds: &[Corruption]) -> Result<SweepTable> {
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no corruption kinds given".into()));
    }
    let sc = &sim.scenario;
    let levels = (MAX_SEVERITY + 1) as usize;
    let mut cells: Vec<Vec<Vec<TrialValues>>> = vec![vec![Vec::new(); levels]; kinds.len()];
    for t in 0..sc.trials {
        let buyer = buyer_side(sim, t, sc.buyer.query_size)?;
        let baseline = measure_trial(
            sim,
            t,
            &buyer,
            SellerOverride {
                corruption: Some((Corruption::Gaussian, 0)),
                ..SellerOverride::default()
            },
        );
        for (ci, &kind) in kinds.iter().enumerate() {
            cells[ci][0].push(baseline.clone());
            for sev in 1..=MAX_SEVERITY {
                let over = SellerOverride {
                    corruption: Some((kind, sev)),
                    ..SellerOverride::default()
                };
                cells[ci][sev as usize].push(measure_trial(sim, t, &buyer, over));
            }
        }
    }
    let mut table = SweepTable::default();
    for (ci, kind) in kinds.iter().enumerate() {
        for (sev, values) in cells[ci].iter().enumerate() {
            summarize(&format!("noise:{kind}"), sev as f64, values, &mut table);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SizeAxis {
    /// Vary every seller's size with the buyer query at the scenario size.
    Seller(Vec<usize>),
    /// Vary the buyer query size with sellers at their scenario sizes.
    Buyer(Vec<usize>),
}

pub fn run_size_sweep(sim: &Simulation, axis: &SizeAxis) -> Result<SweepTable> {
    let sc = &sim.scenario;
    let (name, sizes) = match axis {
        SizeAxis::Seller(s) => ("seller_size", s),
        SizeAxis::Buyer(s) => ("buyer_size", s),
    };
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("no sizes given".into()));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s < sc.k) {
        return Err(Error::InvalidArgument(format!("size {s} is smaller than k = {}", sc.k)));
    }
    let mut cells: Vec<Vec<TrialValues>> = vec![Vec::new(); sizes.len()];
    for t in 0..sc.trials {
        match axis {
            SizeAxis::Seller(sizes) => {
                let buyer = buyer_side(sim, t, sc.buyer.query_size)?;
                for (si, &n) in sizes.iter().enumerate() {
                    let over = SellerOverride {
                        size: Some(n),
                        ..SellerOverride::default()
                    };
                    cells[si].push(measure_trial(sim, t, &buyer, over));
                }
            }
            SizeAxis::Buyer(sizes) => {
                for (si, &n) in sizes.iter().enumerate() {
                    let buyer = buyer_side(sim, t, n)?;
                    cells[si].push(measure_trial(sim, t, &buyer, SellerOverride::default()));
                }
            }
        }
    }
    let mut table = SweepTable::default();
    for (si, &n) in sizes.iter().enumerate() {
        summarize(name, n as f64, &cells[si], &mut table);
    }
    Ok(table)
}
