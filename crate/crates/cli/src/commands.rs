use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use fedmeasure::dataset::{
    corrupt, gaussian_mixture, inject_duplicates, read_embeddings, write_embeddings, EmbeddingSet, MixtureSpec,
};
use fedmeasure::downstream::{run_correlation_experiment, write_correlation_csv};
use fedmeasure::marketplace::{
    csv_writer, run_decoy_experiment, run_duplicate_sweep, run_noise_sweep, run_ranking, run_size_sweep,
    write_decoy_csv, write_ranking_csv, write_sweep_csv, Orientations, Scenario, Simulation, SizeAxis, World,
    WorldSpec,
};
use fedmeasure::measures::{
    compute_query, default_omega, evaluate, seller_report, MeasureKind, MeasurementReport, QueryMatrix, ReportConfig,
};
use fedmeasure::protocol::{
    answer, make_decoys, query_seller, screen_seller, serve_seller, DecoyPlan, QueryMessage, ScreenOutcome, ServeConfig,
};
use fedmeasure::seed::derive_seed;

use crate::{Axis, Cli, Command, Common, DecoyFlags, GenArgs, Pair, ScenarioArgs};

const DEFAULT_K: usize = 10;
const DEFAULT_DECOYS: usize = 19;

// seed streams for commands that draw randomness themselves
const GEN_POINTS: u64 = 1;
const GEN_DUPLICATES: u64 = 2;
const GEN_CORRUPTION: u64 = 3;
const QUERY_DECOYS: u64 = 4;
const QUERY_ORDER: u64 = 5;

pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<fedmeasure::Error> for Failure {
    fn from(e: fedmeasure::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Failure::Usage(msg.into()))
}

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Gen(a) => gen(c, a),
        Command::Measure(a) => measure(c, &a.pair, &a.seller),
        Command::Serve(a) => {
            let set = read(&a.data)?;
            let config = ServeConfig {
                seller_id: a.seller_id.clone(),
                ..ServeConfig::default()
            };
            let service = serve_seller(a.addr.as_str(), set, config)?;
            println!("listening on {}", service.local_addr());
            io::stdout().flush()?;
            service.wait();
            Ok(())
        }
        Command::Query(a) => query(c, a),
        Command::Rank(a) => {
            let sim = simulation(c, a)?;
            let r = run_ranking(&sim, &Orientations::default())?;
            emit(c, |w, note| write_ranking_csv(&r, note, w))
        }
        Command::SweepDuplicates(a) => {
            let t = run_duplicate_sweep(&simulation(c, &a.scenario)?, &a.factors)?;
            emit(c, |w, note| write_sweep_csv(&t, note, w))
        }
        Command::SweepNoise(a) => {
            if a.corruptions.is_empty() {
                return usage("--corruptions needs at least one kind");
            }
            let t = run_noise_sweep(&simulation(c, &a.scenario)?, &a.corruptions)?;
            emit(c, |w, note| write_sweep_csv(&t, note, w))
        }
        Command::SweepSize(a) => {
            let axis = match a.axis {
                Axis::Seller => SizeAxis::Seller(a.sizes.clone()),
                Axis::Buyer => SizeAxis::Buyer(a.sizes.clone()),
            };
            let t = run_size_sweep(&simulation(c, &a.scenario)?, &axis)?;
            emit(c, |w, note| write_sweep_csv(&t, note, w))
        }
        Command::DecoyTest(a) => {
            let plan = decoy_plan(&a.decoy, DEFAULT_DECOYS)?;
            let t = run_decoy_experiment(&simulation(c, &a.scenario)?, &plan)?;
            emit(c, |w, note| write_decoy_csv(&t, note, w))
        }
        Command::Correlate(a) => {
            let sim = simulation(c, &a.scenario)?;
            let task = a.task.map_or(sim.scenario.correlation.task, Into::into);
            let r = run_correlation_experiment(&sim, task)?;
            emit(c, |w, note| write_correlation_csv(&r, note, w))
        }
    }
}

fn invocation() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

/// Runs `write` against `--out` or standard output, passing the invocation
/// line for the CSV comment.
fn emit<F>(c: &Common, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write, &str) -> fedmeasure::Result<()>,
{
    let note = invocation();
    match &c.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write(&mut w, &note)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            write(&mut w, &note)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<EmbeddingSet> {
    read_embeddings(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn gen(c: &Common, a: &GenArgs) -> Result<()> {
    let Some(out) = &c.out else {
        return usage("gen needs --out");
    };
    if a.dim == 0 || a.classes == 0 || a.per_class == 0 {
        return usage("--dim, --classes and --per-class must be positive");
    }
    if !(a.within_scale > 0.0 && a.within_scale.is_finite()) {
        return usage("--within-scale must be positive");
    }
    let seed = c.seed.unwrap_or(0);
    let world = World::new(
        &WorldSpec {
            dim: a.dim,
            num_classes: a.classes,
            num_datasets: a.dataset + 1,
            within_scale: a.within_scale,
            ..WorldSpec::default()
        },
        a.world_seed,
    );
    let mut set = gaussian_mixture(&MixtureSpec {
        num_classes: a.classes,
        dim: a.dim,
        class_means: world.class_means(a.dataset).to_vec(),
        class_scales: vec![a.within_scale; a.classes],
        points_per_class: a.per_class,
        seed: derive_seed(seed, &[GEN_POINTS]),
    })?;
    if a.duplicate > 1 {
        set = inject_duplicates(&set, a.duplicate as usize, derive_seed(seed, &[GEN_DUPLICATES]))?;
    }
    if let Some(kind) = a.corruption {
        if a.severity > 0 {
            set = corrupt(&set, kind, a.severity, derive_seed(seed, &[GEN_CORRUPTION]))?;
        }
    }
    write_embeddings(&set, out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    eprintln!(
        "wrote {} points of dimension {} to {}",
        set.len(),
        set.dim(),
        out.display()
    );
    Ok(())
}

/// The buyer half of an exchange: the query as it travels on the wire and
/// the buyer's own report under it.
struct Prepared {
    message: QueryMessage,
    query: QueryMatrix,
    report: MeasurementReport,
}

fn prepare(c: &Common, buyer: &EmbeddingSet, omega: Option<f64>) -> Result<Prepared> {
    if let Some(w) = omega {
        if !(w > 0.0 && w.is_finite()) {
            return usage("--omega must be positive");
        }
    }
    let k = c.k.unwrap_or(DEFAULT_K);
    let exact = compute_query(buyer, k)?.with_id("q0");
    let mut message = QueryMessage::from_query(&exact, &[], None);
    let query = message.to_query()?;
    let omega = match omega {
        Some(w) => w,
        None => default_omega(buyer, &query)?,
    };
    message.omega = Some(omega);
    let report = seller_report(
        buyer,
        &query,
        &ReportConfig {
            omega: Some(omega),
            ..ReportConfig::default()
        },
    )?;
    Ok(Prepared { message, query, report })
}

fn kinds(pair: &Pair) -> Vec<MeasureKind> {
    if pair.kinds.is_empty() {
        MeasureKind::ALL.to_vec()
    } else {
        pair.kinds.clone()
    }
}

fn csv_err<E: Into<io::Error>>(e: E) -> fedmeasure::Error {
    fedmeasure::Error::Io(e.into())
}

type Screen = Vec<Option<fedmeasure::Result<ScreenOutcome>>>;

fn write_measurements(
    w: &mut dyn Write,
    note: &str,
    kinds: &[MeasureKind],
    buyer: &MeasurementReport,
    seller: &MeasurementReport,
    screen: Option<Screen>,
) -> fedmeasure::Result<()> {
    let mut out = csv_writer(w, note)?;
    let mut header = vec!["kind", "value"];
    if screen.is_some() {
        header.extend(["ratio", "verdict"]);
    }
    out.write_record(&header).map_err(csv_err)?;
    for (i, &kind) in kinds.iter().enumerate() {
        let value = match evaluate(kind, buyer, seller) {
            // normalizes -0
            Ok(v) => (v + 0.0).to_string(),
            Err(e) => {
                eprintln!("warning: {kind}: {e}");
                String::new()
            }
        };
        let mut rec = vec![kind.to_string(), value];
        if let Some(screen) = &screen {
            match &screen[i] {
                Some(Ok(o)) => {
                    rec.push(o.ratio.to_string());
                    rec.push(if o.accepted { "accept" } else { "reject" }.into());
                }
                Some(Err(e)) => {
                    eprintln!("warning: {kind} screen: {e}");
                    rec.extend([String::new(), "undefined".into()]);
                }
                None => rec.extend([String::new(), "undefined".into()]),
            }
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn measure(c: &Common, pair: &Pair, seller: &Path) -> Result<()> {
    let buyer = read(&pair.buyer)?;
    let seller = read(seller)?;
    if buyer.dim() != seller.dim() {
        return Err(Failure::Runtime(format!(
            "buyer has dimension {} but seller has {}",
            buyer.dim(),
            seller.dim()
        )));
    }
    let prep = prepare(c, &buyer, pair.omega)?;
    // same path as a remote seller, minus the socket
    let reply = answer(&seller, &ServeConfig::default(), &prep.message)?;
    let seller_side = reply.to_report()?;
    let kinds = kinds(pair);
    emit(c, |w, note| {
        write_measurements(w, note, &kinds, &prep.report, &seller_side, None)
    })
}

fn decoy_plan(f: &DecoyFlags, default_count: usize) -> Result<DecoyPlan> {
    let plan = DecoyPlan {
        num_decoys: f.decoys.unwrap_or(default_count),
        strategies: f.strategies.clone(),
        quantile: f.quantile,
        threshold: f.threshold,
    };
    plan.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(plan)
}

fn query(c: &Common, a: &crate::QueryArgs) -> Result<()> {
    let buyer = read(&a.pair.buyer)?;
    let timeout = Duration::from_millis(a.timeout_ms);
    let kinds = kinds(&a.pair);
    if a.decoy.decoys.is_none() {
        let prep = prepare(c, &buyer, a.pair.omega)?;
        let reply = query_seller(a.addr.as_str(), &prep.message, timeout)?;
        let seller_side = reply.to_report()?;
        return emit(c, |w, note| {
            write_measurements(w, note, &kinds, &prep.report, &seller_side, None)
        });
    }
    if a.pair.omega.is_some() {
        return usage("--omega cannot be combined with --decoys; each query derives its own");
    }
    let plan = decoy_plan(&a.decoy, DEFAULT_DECOYS)?;
    let foreign = a.foreign.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
    let seed = c.seed.unwrap_or(0);
    let prep = prepare(c, &buyer, None)?;
    let decoys = make_decoys(
        &buyer,
        prep.query.k(),
        &plan,
        &foreign,
        derive_seed(seed, &[QUERY_DECOYS]),
    )?;
    let result = screen_seller(
        &buyer,
        &prep.query,
        &decoys,
        &kinds,
        &plan,
        derive_seed(seed, &[QUERY_ORDER]),
        |m| query_seller(a.addr.as_str(), m, timeout),
    )?;
    let mut outcomes = result.outcomes;
    let screen: Screen = kinds.iter().map(|k| outcomes.remove(k)).collect();
    emit(c, |w, note| {
        write_measurements(w, note, &kinds, &result.real.buyer, &result.real.seller, Some(screen))
    })
}

fn simulation(c: &Common, a: &ScenarioArgs) -> Result<Simulation> {
    let mut sc =
        Scenario::from_path(&a.scenario).map_err(|e| Failure::Runtime(format!("{}: {e}", a.scenario.display())))?;
    if let Some(seed) = c.seed {
        sc.seed = seed;
    }
    if let Some(k) = c.k {
        sc.k = k;
    }
    if let Some(t) = a.trials {
        sc.trials = t;
    }
    sc.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Simulation::new(&sc)?)
}
