//! Downstream models trained on seller data, and how their test performance
//! correlates with the seller's measurements.

mod kmeans;
mod logistic;

use std::collections::{BTreeMap, HashMap};

pub use kmeans::{kmeans, KMeansConfig, KMeansModel};
pub use logistic::{accuracy, logistic_fit, logistic_predict, LogisticConfig, LogisticModel};

pub use crate::kernel::stats::pearson;

use crate::dataset::EmbeddingSet;
use crate::error::{Error, Result};
use crate::marketplace::{buyer_side, measure_all, SellerOverride, Simulation, Task, MODEL};
use crate::measures::{seller_report, MeasureKind};
use crate::par;

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// `1 − H(class | cluster) / H(class)`, and 1 when there is only one class.
pub fn homogeneity(assignments: &[usize], labels: &[u32]) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: assignments.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = labels.len() as f64;
    let mut class_counts: HashMap<u32, usize> = HashMap::new();
    let mut cluster_counts: HashMap<usize, usize> = HashMap::new();
    let mut joint: HashMap<(usize, u32), usize> = HashMap::new();
    for (&k, &c) in assignments.iter().zip(labels) {
        *class_counts.entry(c).or_default() += 1;
        *cluster_counts.entry(k).or_default() += 1;
        *joint.entry((k, c)).or_default() += 1;
    }
    let h_class = entropy(class_counts.values().copied(), n);
    if h_class == 0.0 {
        return Ok(1.0);
    }
    let h_cond: f64 = joint
        .iter()
        .map(|(&(k, _), &nkc)| {
            let p = nkc as f64 / n;
            -p * (nkc as f64 / cluster_counts[&k] as f64).ln()
        })
        .sum();
    Ok((1.0 - h_cond / h_class).clamp(0.0, 1.0))
}

/// Per-kind Pearson correlation between seller measurements and a metric.
///
/// `values[seller][kind]` follows [`MeasureKind::ALL`]; sellers with a
/// missing value for a kind are left out of that kind's correlation.
pub fn correlation_by_kind(values: &[Vec<Option<f64>>], metric: &[f64]) -> Result<BTreeMap<MeasureKind, f64>> {
    if values.len() != metric.len() {
        return Err(Error::DimensionMismatch {
            expected: metric.len(),
            found: values.len(),
        });
    }
    MeasureKind::ALL
        .iter()
        .enumerate()
        .map(|(ki, &kind)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = values
                .iter()
                .zip(metric)
                .filter_map(|(v, &m)| v[ki].map(|x| (x, m)))
                .unzip();
            Ok((kind, pearson(&xs, &ys)?))
        })
        .collect()
}

/// Measurements and test metric for one (buyer, seller) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SellerRow {
    pub buyer: usize,
    pub seller: usize,
    pub values: Vec<Option<f64>>,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub task: Task,
    /// Correlation per kind, averaged over buyers.
    pub correlations: BTreeMap<MeasureKind, f64>,
    pub per_buyer: Vec<BTreeMap<MeasureKind, f64>>,
    pub rows: Vec<SellerRow>,
    /// Sellers that could not be trained (for example a single class in the
    /// binary task).
    pub skipped: Vec<usize>,
}

enum Trained {
    Logistic(LogisticModel),
    Clusters(KMeansModel),
}

fn binary_labels(set: &EmbeddingSet, classes: usize) -> Result<Vec<u32>> {
    let labels = set.labels().ok_or(Error::Unlabeled)?;
    let half = (classes / 2).max(1) as u32;
    Ok(labels.iter().map(|&l| u32::from(l >= half)).collect())
}

fn train(set: &EmbeddingSet, task: Task, classes: usize, seed: u64) -> Result<Trained> {
    match task {
        Task::Binary => {
            let relabeled = set.clone().with_labels(binary_labels(set, classes)?)?;
            logistic_fit(&relabeled, &LogisticConfig::default()).map(Trained::Logistic)
        }
        Task::Clustering => {
            kmeans(set.vectors(), classes, &KMeansConfig { max_iter: 100, seed }).map(Trained::Clusters)
        }
    }
}

fn test_metric(model: &Trained, test: &EmbeddingSet, classes: usize) -> Result<f64> {
    let labels = test.labels().ok_or(Error::Unlabeled)?;
    match model {
        Trained::Logistic(m) => accuracy(&logistic_predict(m, test.vectors())?, &binary_labels(test, classes)?),
        Trained::Clusters(m) => homogeneity(&m.predict(test.vectors())?, labels),
    }
}

/// Per buyer: every measurement and the downstream metric.
type BuyerRows = Vec<(Vec<Option<f64>>, f64)>;

/// Trains one model per seller, scores it on each buyer's held-out test set,
/// and correlates the scores with the seller's measurements under that
/// buyer's query. Correlations are averaged over buyers.
///
/// Sellers use trial-0 data; buyer `b` uses the trial-`b` buyer samples.
pub fn run_correlation_experiment(sim: &Simulation, task: Task) -> Result<CorrelationResult> {
    let sc = &sim.scenario;
    let classes = sc.world.num_classes;
    let buyers = sc.correlation.buyers;
    if buyers < 1 {
        return Err(Error::Scenario("correlation needs at least one buyer".into()));
    }
    let sides = (0..buyers)
        .map(|b| buyer_side(sim, b, sc.buyer.query_size))
        .collect::<Result<Vec<_>>>()?;
    let tests = (0..buyers).map(|b| sim.buyer_test(b)).collect::<Result<Vec<_>>>()?;

    let per_seller = par::map(sim.sellers().len(), |j| -> Result<Option<BuyerRows>> {
        let data = sim.seller(0, j, SellerOverride::default())?;
        let model = match train(&data, task, classes, sim.seed(&[MODEL, j as u64])) {
            Ok(m) => m,
            Err(Error::SingleClass) => return Ok(None),
            Err(e) => return Err(e),
        };
        sides
            .iter()
            .zip(&tests)
            .map(|(side, test)| {
                let report = seller_report(&data, &side.query, &side.config);
                Ok((measure_all(&side.report, &report), test_metric(&model, test, classes)?))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    });

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (j, res) in per_seller.into_iter().enumerate() {
        match res? {
            None => skipped.push(j),
            Some(per_buyer) => {
                for (b, (values, metric)) in per_buyer.into_iter().enumerate() {
                    rows.push(SellerRow {
                        buyer: b,
                        seller: j,
                        values,
                        metric,
                    });
                }
            }
        }
    }
    let per_buyer = (0..buyers)
        .map(|b| {
            let (values, metric): (Vec<_>, Vec<_>) = rows
                .iter()
                .filter(|r| r.buyer == b)
                .map(|r| (r.values.clone(), r.metric))
                .unzip();
            correlation_by_kind(&values, &metric)
        })
        .collect::<Result<Vec<_>>>()?;
    let correlations = MeasureKind::ALL
        .iter()
        .map(|&k| (k, per_buyer.iter().map(|m| m[&k]).sum::<f64>() / buyers as f64))
        .collect();
    Ok(CorrelationResult {
        task,
        correlations,
        per_buyer,
        rows,
        skipped,
    })
}

/// Per-(buyer, seller) rows then one `pearson` summary row.
///
/// Columns: `buyer,seller,<one column per kind>,metric`.
pub fn write_correlation_csv<W: std::io::Write>(r: &CorrelationResult, comment: &str, w: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    let mut out = crate::marketplace::csv_writer(w, comment)?;
    let mut header = vec!["buyer".to_string(), "seller".to_string()];
    header.extend(MeasureKind::ALL.iter().map(|k| k.to_string()));
    header.push("metric".into());
    out.write_record(&header).map_err(csv_err)?;
    for row in &r.rows {
        let mut rec = vec![row.buyer.to_string(), row.seller.to_string()];
        rec.extend(row.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        rec.push(row.metric.to_string());
        out.write_record(&rec).map_err(csv_err)?;
    }
    let mut summary = vec!["pearson".to_string(), "all".to_string()];
    summary.extend(MeasureKind::ALL.iter().map(|k| r.correlations[k].to_string()));
    summary.push(String::new());
    out.write_record(&summary).map_err(csv_err)?;
    out.flush()?;
    Ok(())
}
