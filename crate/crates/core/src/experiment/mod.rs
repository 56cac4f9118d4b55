//! Scenario execution, paired-seed sweeps, summary statistics and reports.

mod reports;
mod run;
mod stats;
mod sweep;

pub use reports::{
    emit_compare_reports, emit_run_reports, emit_sweep_reports, render_arrivals_csv, render_compare_csv,
    render_estimates_csv, render_summary_json, render_sweep_csv, render_sweep_summary_csv, ARTIFACT, VERSION,
};
pub use run::{
    build_simulation, mean_latency, run_scenario, scenario_topology, summarize_run, DeliveryRecord, RunResult,
};
pub use stats::{mean, quartiles, summarize, Quartiles, Summary};
pub use sweep::{compare, replication_seed, sweep, CompareRow, SweepParam, SweepRow, SweepTable, ValueSummary};

use crate::config::ConfigError;
use crate::network::NetworkError;
use crate::report::IoFailure;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] IoFailure),
    #[error("no deliveries after warmup")]
    NoDeliveries,
    #[error("no samples to summarize")]
    EmptySamples,
    #[error("unknown sweep parameter '{0}' (expected buffer_q, interarrival_s, discipline or mu)")]
    UnknownParameter(String),
    #[error("invalid value '{value}' for {param}: {reason}")]
    InvalidValue {
        param: String,
        value: String,
        reason: String,
    },
    #[error("a sweep needs at least one value")]
    EmptySweep,
    #[error("replications must be at least 1")]
    ZeroReplications,
    #[error("a comparison needs at least 2 disciplines, got {0}")]
    TooFewDisciplines(usize),
}
