//! Rate-privacy buffering in multi-hop sensor networks.
//!
//! Poisson sources send constant-size reports hop by hop toward a base
//! station. Every node on the path holds messages in a slotted buffer whose
//! discipline decides when each one leaves; an eavesdropper at the base
//! station sees only arrival instants and estimates the source rate.
//!
//! The crate is organised as:
//!
//! * [`sim`]: event engine, simulation clock, labeled random streams.
//! * [`buffering`]: slotted buffers with `fifo`, `random-ladder` and
//!   `random-shuffle` disciplines.
//! * [`network`]: topology, routing tree, sources and the forwarding process.
//! * [`adversary`]: rate estimators, Cramér–Rao bound, KS test.
//! * [`experiment`]: scenario runs, paired sweeps, summaries and reports.
//! * [`config`]: scenario files and overrides.
//! * [`validation`]: the built-in verification suite.

pub mod adversary;
pub mod buffering;
pub mod config;
pub mod experiment;
pub mod network;
pub mod report;
pub mod sim;
pub mod validation;

pub use config::{parse_config, parse_config_str, ConfigError, ScenarioConfig};
pub use experiment::{run_scenario, sweep, ExperimentError, RunResult, SweepParam, SweepTable};
