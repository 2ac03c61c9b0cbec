//! `fdm`: generate embedding sets, measure sellers, run the seller service
//! and drive the marketplace experiments. Results are CSV.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedmeasure::dataset::Corruption;
use fedmeasure::marketplace::Task;
use fedmeasure::measures::MeasureKind;
use fedmeasure::protocol::DecoyStrategy;

#[derive(Debug, Parser)]
#[command(name = "fdm", version, about = "Private data-market measurements on embedding sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Random seed; scenario commands use it in place of the file's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of query directions.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Output file (standard output when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a labeled Gaussian-mixture embedding set.
    Gen(GenArgs),
    /// Compare a buyer file with a seller file in process.
    Measure(MeasureArgs),
    /// Answer measurement queries for one embedding file.
    Serve(ServeArgs),
    /// Query a running seller, optionally with decoys.
    Query(QueryArgs),
    /// Rank a scenario's sellers under every measure.
    Rank(ScenarioArgs),
    /// Duplicate every seller's data by each factor.
    SweepDuplicates(DuplicateArgs),
    /// Corrupt every seller at severities 1 to 5.
    SweepNoise(NoiseArgs),
    /// Vary seller or buyer sample size.
    SweepSize(SizeArgs),
    /// Screen a scenario's sellers with decoy queries.
    DecoyTest(DecoyTestArgs),
    /// Correlate measures with a downstream task metric.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 1000)]
    pub per_class: usize,
    /// Seed of the world's class means; `--seed` only drives the sampling, so
    /// files sharing a world seed and dataset share a distribution.
    #[arg(long, default_value_t = 0)]
    pub world_seed: u64,
    /// Which dataset of the world to sample.
    #[arg(long, default_value_t = 0)]
    pub dataset: usize,
    #[arg(long, default_value_t = 0.3)]
    pub within_scale: f64,
    #[arg(long)]
    pub corruption: Option<Corruption>,
    #[arg(long, default_value_t = 0, requires = "corruption", value_parser = clap::value_parser!(u32).range(0..=5))]
    pub severity: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub duplicate: u64,
}

#[derive(Debug, Args)]
pub struct Pair {
    #[arg(long)]
    pub buyer: PathBuf,
    /// Measures to report, comma separated (all by default).
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<MeasureKind>,
    /// Grid width for robust volume (derived from the buyer when omitted).
    #[arg(long)]
    pub omega: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub pair: Pair,
    #[arg(long)]
    pub seller: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7431")]
    pub addr: String,
    #[arg(long, default_value = "seller")]
    pub seller_id: String,
}

#[derive(Debug, Args)]
pub struct DecoyFlags {
    /// Number of decoy queries (query screens only when given; decoy-test
    /// defaults to 19).
    #[arg(long)]
    pub decoys: Option<usize>,
    #[arg(long = "strategy", value_delimiter = ',', default_value = "random_directions")]
    pub strategies: Vec<DecoyStrategy>,
    #[arg(long, default_value_t = 0.75)]
    pub quantile: f64,
    #[arg(long, default_value_t = 1.2)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub pair: Pair,
    #[arg(long, default_value = "127.0.0.1:7431")]
    pub addr: String,
    #[arg(long, default_value_t = 5000)]
    pub timeout_ms: u64,
    #[command(flatten)]
    pub decoy: DecoyFlags,
    /// Unrelated embedding files for foreign_dataset decoys.
    #[arg(long)]
    pub foreign: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Override the scenario's trial count.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DuplicateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,200")]
    pub factors: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "gaussian,shift,scale,mask")]
    pub corruptions: Vec<Corruption>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Seller,
    Buyer,
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = Axis::Seller)]
    pub axis: Axis,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct DecoyTestArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub decoy: DecoyFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Binary,
    Clustering,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Binary => Task::Binary,
            TaskArg::Clustering => Task::Clustering,
        }
    }
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Override the scenario's task.
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(commands::Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
