//! Browser bindings: three small marketplace experiments that return JSON.
//!
//! Each export has a plain Rust twin (`*_json`) so the logic is testable
//! natively; the `#[wasm_bindgen]` wrappers only convert the error type.

use fedmeasure::marketplace::{
    run_decoy_experiment, run_duplicate_sweep, run_ranking, BuyerSpec, Orientations, Scenario, SellerSpec, Simulation,
    WorldSpec,
};
use fedmeasure::measures::MeasureKind;
use fedmeasure::protocol::{DecoyPlan, DecoyStrategy};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const DIM: usize = 32;
const CLASSES: usize = 4;
const K: usize = 4;
const BUYER_POINTS: usize = 60;
const SELLER_POINTS: usize = 600;

fn scenario(seed: u64, datasets: usize, sellers: Vec<SellerSpec>, trials: usize) -> Scenario {
    Scenario {
        name: "demo".into(),
        seed,
        trials,
        k: K,
        world: WorldSpec {
            dim: DIM,
            num_classes: CLASSES,
            num_datasets: datasets,
            ..WorldSpec::default()
        },
        buyer: BuyerSpec {
            dataset: 0,
            query_size: BUYER_POINTS,
            test_size: 1,
        },
        sellers,
        ..Scenario::default()
    }
}

fn seller(dataset: usize) -> SellerSpec {
    SellerSpec {
        dataset,
        size: SELLER_POINTS,
        ..SellerSpec::default()
    }
}

fn finite(v: Option<f64>) -> Value {
    v.filter(|x| x.is_finite()).map_or(Value::Null, Value::from)
}

/// One trial with seller 0 drawn from the buyer's distribution and the rest
/// from other datasets. Returns every seller's value and the IID seller's
/// rank for each measure.
pub fn ranking_json(seed: u64, sellers: usize, noise_severity: u32) -> Result<String, String> {
    if !(2..=12).contains(&sellers) {
        return Err("choose between 2 and 12 sellers".into());
    }
    let mut specs: Vec<SellerSpec> = (0..sellers).map(seller).collect();
    if noise_severity > 0 {
        // a corrupted copy of the buyer's distribution competes with the IID seller
        specs[sellers - 1] = SellerSpec {
            corruption: Some(fedmeasure::dataset::Corruption::Gaussian),
            severity: noise_severity,
            ..seller(0)
        };
    }
    let sim = Simulation::new(&scenario(seed, sellers, specs, 1)).map_err(|e| e.to_string())?;
    let r = run_ranking(&sim, &Orientations::default()).map_err(|e| e.to_string())?;
    let kinds: Vec<Value> = r
        .kinds
        .iter()
        .enumerate()
        .map(|(ki, kr)| {
            let values: Vec<Value> = r.trials[0].values.iter().map(|v| finite(v[ki])).collect();
            json!({ "kind": kr.kind.name(), "values": values, "iid_rank": kr.iid_ranks[0] })
        })
        .collect();
    Ok(json!({ "sellers": sellers, "iid_seller": r.iid_seller, "kinds": kinds }).to_string())
}

/// Trial-averaged value of every measure as one seller's data is duplicated.
pub fn duplicates_json(seed: u64, factors: &[usize]) -> Result<String, String> {
    if factors.is_empty() || factors.len() > 8 {
        return Err("give between 1 and 8 factors".into());
    }
    let sim = Simulation::new(&scenario(seed, 1, vec![seller(0)], 3)).map_err(|e| e.to_string())?;
    let t = run_duplicate_sweep(&sim, factors).map_err(|e| e.to_string())?;
    let kinds: Vec<Value> = MeasureKind::ALL
        .iter()
        .map(|&k| {
            let line: Vec<Value> = t
                .line("duplication", None, k)
                .iter()
                .map(|p| finite(Some(p.1)))
                .collect();
            json!({ "kind": k.name(), "values": line })
        })
        .collect();
    Ok(json!({ "factors": factors, "kinds": kinds }).to_string())
}

/// Median decoy ratio per measure for an IID seller and an unrelated one,
/// using decoys built from other datasets.
pub fn decoys_json(seed: u64, decoys: usize, quantile: f64) -> Result<String, String> {
    if !(1..=40).contains(&decoys) {
        return Err("choose between 1 and 40 decoys".into());
    }
    let plan = DecoyPlan {
        num_decoys: decoys,
        strategies: vec![DecoyStrategy::ForeignDataset],
        quantile,
        threshold: DecoyPlan::default().threshold,
    };
    let sim = Simulation::new(&scenario(seed, 6, vec![seller(0), seller(1)], 3)).map_err(|e| e.to_string())?;
    let t = run_decoy_experiment(&sim, &plan).map_err(|e| e.to_string())?;
    let kinds: Vec<Value> = MeasureKind::ALL
        .iter()
        .map(|&k| {
            json!({
                "kind": k.name(),
                "iid": finite(t.median_ratio(0, k)),
                "unrelated": finite(t.median_ratio(1, k)),
                "iid_accepted": t.acceptance_rate(0, k),
                "unrelated_accepted": t.acceptance_rate(1, k),
            })
        })
        .collect();
    Ok(json!({ "decoys": decoys, "quantile": quantile, "threshold": plan.threshold, "kinds": kinds }).to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn rank_sellers(seed: u32, sellers: u32, noise_severity: u32) -> Result<String, JsValue> {
    js(ranking_json(seed.into(), sellers as usize, noise_severity))
}

#[wasm_bindgen]
pub fn duplicate_curve(seed: u32, factors: &str) -> Result<String, JsValue> {
    let parsed: Result<Vec<usize>, _> = factors.split(',').map(|f| f.trim().parse::<usize>()).collect();
    js(parsed
        .map_err(|e| format!("factors: {e}"))
        .and_then(|f| duplicates_json(seed.into(), &f)))
}

#[wasm_bindgen]
pub fn decoy_ratios(seed: u32, decoys: u32, quantile: f64) -> Result<String, JsValue> {
    js(decoys_json(seed.into(), decoys as usize, quantile))
}
