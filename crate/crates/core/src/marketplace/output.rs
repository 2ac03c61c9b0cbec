//! CSV result files. Each file starts with one `#` comment line (typically
//! the invocation that produced it) followed by a header row.

use std::io::Write;

use super::decoys::DecoyTable;
use super::ranking::{dcg_of_rank, RankingResult};
use super::sweep::SweepTable;
use crate::error::{Error, Result};
use crate::measures::MeasureKind;

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

/// Writes `# comment` then returns a CSV writer positioned for the header.
pub fn csv_writer<W: Write>(mut w: W, comment: &str) -> Result<csv::Writer<W>> {
    writeln!(w, "# {}", comment.replace('\n', " "))?;
    Ok(csv::Writer::from_writer(w))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Ranking results.
///
/// Columns: `trial,seller,kind,value,rank,dcg,rank_std,dcg_std,trials,warnings,ties`.
/// Per-trial rows have one line per (trial, seller, kind); `dcg` is the
/// seller's gain (1 for the IID seller, 0 otherwise) discounted by its rank.
/// Summary rows use `trial = all`, carry the IID seller's index, and report
/// means over trials.
pub fn write_ranking_csv<W: Write>(r: &RankingResult, comment: &str, w: W) -> Result<()> {
    let mut out = csv_writer(w, comment)?;
    out.write_record([
        "trial", "seller", "kind", "value", "rank", "dcg", "rank_std", "dcg_std", "trials", "warnings", "ties",
    ])
    .map_err(csv_err)?;
    for (ti, tm) in r.trials.iter().enumerate() {
        for (ki, kr) in r.kinds.iter().enumerate() {
            let order = &kr.orderings[ti];
            for (j, vals) in tm.values.iter().enumerate() {
                let rank = order.iter().position(|&s| s == j).expect("permutation") + 1;
                let gain = if j == r.iid_seller { dcg_of_rank(rank)? } else { 0.0 };
                out.write_record([
                    tm.trial.to_string(),
                    j.to_string(),
                    kr.kind.to_string(),
                    fmt_opt(vals[ki]),
                    rank.to_string(),
                    gain.to_string(),
                    String::new(),
                    String::new(),
                    "1".into(),
                    usize::from(vals[ki].is_none()).to_string(),
                    String::new(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    for (ki, kr) in r.kinds.iter().enumerate() {
        let vals: Vec<f64> = r.trials.iter().filter_map(|t| t.values[r.iid_seller][ki]).collect();
        out.write_record([
            "all".to_string(),
            r.iid_seller.to_string(),
            kr.kind.to_string(),
            crate::kernel::stats::mean(&vals).to_string(),
            kr.mean_rank().to_string(),
            kr.mean_dcg().to_string(),
            kr.std_rank().to_string(),
            kr.std_dcg().to_string(),
            kr.iid_ranks.len().to_string(),
            kr.warnings.to_string(),
            kr.ties.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Sweep results. Columns: `sweep,value,seller,kind,mean,std,trials,warnings`;
/// `seller` is `aggregate` on the across-seller average line.
pub fn write_sweep_csv<W: Write>(t: &SweepTable, comment: &str, w: W) -> Result<()> {
    let mut out = csv_writer(w, comment)?;
    out.write_record(["sweep", "value", "seller", "kind", "mean", "std", "trials", "warnings"])
        .map_err(csv_err)?;
    for row in &t.rows {
        out.write_record([
            row.sweep.clone(),
            row.value.to_string(),
            row.seller.map_or_else(|| "aggregate".to_string(), |s| s.to_string()),
            row.kind.to_string(),
            row.mean.to_string(),
            row.std.to_string(),
            row.trials.to_string(),
            row.warnings.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Decoy screening results. Columns: `trial,seller,kind,ratio,accepted`;
/// summary rows use `trial = median` with the median ratio and the fraction
/// of trials accepted.
pub fn write_decoy_csv<W: Write>(t: &DecoyTable, comment: &str, w: W) -> Result<()> {
    let mut out = csv_writer(w, comment)?;
    out.write_record(["trial", "seller", "kind", "ratio", "accepted"])
        .map_err(csv_err)?;
    for row in &t.rows {
        out.write_record([
            row.trial.to_string(),
            row.seller.to_string(),
            row.kind.to_string(),
            fmt_opt(row.ratio),
            u8::from(row.accepted).to_string(),
        ])
        .map_err(csv_err)?;
    }
    let mut sellers: Vec<usize> = t.rows.iter().map(|r| r.seller).collect();
    sellers.sort_unstable();
    sellers.dedup();
    for s in sellers {
        for kind in MeasureKind::ALL {
            out.write_record([
                "median".to_string(),
                s.to_string(),
                kind.to_string(),
                fmt_opt(t.median_ratio(s, kind)),
                t.acceptance_rate(s, kind).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}
