use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::buffering::Discipline;
use crate::sim::{RngStream, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceMode {
    Poisson,
    Deterministic,
    PoissonPlusDummy,
}

impl SourceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceMode::Poisson => "poisson",
            SourceMode::Deterministic => "deterministic",
            SourceMode::PoissonPlusDummy => "poisson-plus-dummy",
        }
    }
}

impl fmt::Display for SourceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SourceMode::Poisson,
            SourceMode::Deterministic,
            SourceMode::PoissonPlusDummy,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| format!("unknown source mode '{s}'"))
    }
}

/// Traffic generation at the active source nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub mode: SourceMode,
    /// Real-message rate per active source (Poisson modes).
    pub lambda_per_s: f64,
    /// Emission period (deterministic mode).
    pub interval_s: f64,
    /// Dummy-message rate per active source (`poisson-plus-dummy`).
    pub dummy_rate_per_s: f64,
    /// Active source nodes. Empty means "the deepest node of the routing tree".
    pub active_sources: Vec<usize>,
}

impl SourceConfig {
    /// Aggregate real-message generation rate the adversary is trying to learn.
    pub fn true_rate(&self, active: usize) -> f64 {
        let per_source = match self.mode {
            SourceMode::Deterministic => 1.0 / self.interval_s,
            SourceMode::Poisson | SourceMode::PoissonPlusDummy => self.lambda_per_s,
        };
        per_source * active as f64
    }

    pub fn emits_dummies(&self) -> bool {
        self.mode == SourceMode::PoissonPlusDummy && self.dummy_rate_per_s > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub mu_per_s: f64,
    pub discipline: Discipline,
    pub buffer_q: usize,
    pub hop_delay_s: f64,
    /// Whether a source buffers its own reports before the first hop.
    pub source_buffers: bool,
}

/// Which sub-process of a source an emission belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Emission {
    Real,
    Dummy,
}

/// Time of the next emission of the given sub-process.
///
/// In `poisson-plus-dummy` mode the real and dummy processes are independent
/// Poisson streams (each drawn from its own stream); their superposition is
/// the node's emission process.
pub fn next_emission(
    source: &SourceConfig,
    emission: Emission,
    stream: &mut RngStream,
    now: SimTime,
) -> SimTime {
    let gap = match (source.mode, emission) {
        (SourceMode::Deterministic, _) => source.interval_s,
        (_, Emission::Real) => stream
            .exponential(source.lambda_per_s)
            .expect("validated source rate"),
        (_, Emission::Dummy) => stream
            .exponential(source.dummy_rate_per_s)
            .expect("validated dummy rate"),
    };
    now + gap
}
