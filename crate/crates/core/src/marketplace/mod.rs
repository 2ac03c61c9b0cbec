//! Multi-seller experiments on a synthetic embedding world.
//!
//! A [`Scenario`] describes the world, the buyer and a list of sellers; a
//! [`Simulation`] materializes it. Every sample is seeded by its logical
//! position (trial, role, seller index), so results are identical whatever
//! the evaluation order or thread count.

mod decoys;
mod output;
mod ranking;
mod scenario;
mod sweep;

pub use decoys::{run_decoy_experiment, DecoyRow, DecoyTable};
pub use output::{csv_writer, write_decoy_csv, write_ranking_csv, write_sweep_csv};
pub use ranking::{
    dcg_of_rank, rank_sellers, run_ranking, KindRanking, Orientations, RankingResult, TrialMeasurements,
};
pub use scenario::{
    BuyerSpec, CorrelationSpec, Scenario, SellerOverride, SellerSpec, Simulation, Task, World, WorldSpec,
};
pub use sweep::{run_duplicate_sweep, run_noise_sweep, run_size_sweep, SizeAxis, SweepRow, SweepTable};

pub(crate) use ranking::{buyer_side, measure_all};
pub(crate) use scenario::MODEL;
