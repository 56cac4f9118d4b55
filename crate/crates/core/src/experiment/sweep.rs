use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::run::run_scenario;
use super::stats::{mean, summarize, Summary};
use super::ExperimentError;
use crate::buffering::Discipline;
use crate::config::ScenarioConfig;
use crate::sim::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    BufferQ,
    InterarrivalS,
    Discipline,
    Mu,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::BufferQ => "buffer_q",
            SweepParam::InterarrivalS => "interarrival_s",
            SweepParam::Discipline => "discipline",
            SweepParam::Mu => "mu",
        }
    }

    /// Returns `base` with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: &str) -> Result<ScenarioConfig, ExperimentError> {
        let invalid = |reason: String| ExperimentError::InvalidValue {
            param: self.as_str().to_string(),
            value: value.to_string(),
            reason,
        };
        let mut cfg = base.clone();
        let number = || value.trim().parse::<f64>().map_err(|e| invalid(e.to_string()));
        match self {
            SweepParam::BufferQ => {
                cfg.service.buffer_q = value.trim().parse().map_err(|e: std::num::ParseIntError| invalid(e.to_string()))?;
            }
            SweepParam::InterarrivalS => {
                let ia = number()?;
                if !(ia > 0.0) {
                    return Err(invalid("must be positive".into()));
                }
                cfg.source.lambda_per_s = 1.0 / ia;
                cfg.source.interval_s = ia;
            }
            SweepParam::Discipline => {
                cfg.service.discipline = value.trim().parse().map_err(|e: crate::buffering::UnknownDiscipline| invalid(e.to_string()))?;
            }
            SweepParam::Mu => cfg.service.mu_per_s = number()?,
        }
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SweepParam::BufferQ,
            SweepParam::InterarrivalS,
            SweepParam::Discipline,
            SweepParam::Mu,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| ExperimentError::UnknownParameter(s.to_string()))
    }
}

/// Master seed of replication `rep`. It depends on the base seed and the
/// replication index only, so every parameter value sees the same topology
/// and source streams for a given `rep`.
pub fn replication_seed(base_seed: u64, rep: usize) -> u64 {
    derive_seed(base_seed, rep as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub rep: usize,
    pub seed: u64,
    pub lambda_hat: Option<f64>,
    pub rel_error: Option<f64>,
    pub mean_latency_s: Option<f64>,
    pub drops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueSummary {
    pub value: String,
    pub lambda_hat: Option<Summary>,
    pub rel_error: Option<Summary>,
    pub mean_latency_s: Option<Summary>,
    pub drops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub values: Vec<String>,
    pub replications: usize,
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<ValueSummary>,
}

impl SweepTable {
    /// Per-value summaries computed from `rows`.
    pub fn recompute_summaries(&self) -> Vec<ValueSummary> {
        self.values
            .iter()
            .map(|v| {
                let rows: Vec<&SweepRow> = self.rows.iter().filter(|r| &r.value == v).collect();
                let col = |f: fn(&SweepRow) -> Option<f64>| -> Vec<f64> {
                    rows.iter().filter_map(|r| f(r)).collect()
                };
                ValueSummary {
                    value: v.clone(),
                    lambda_hat: summarize(&col(|r| r.lambda_hat)),
                    rel_error: summarize(&col(|r| r.rel_error)),
                    mean_latency_s: summarize(&col(|r| r.mean_latency_s)),
                    drops: rows.iter().map(|r| r.drops).sum(),
                }
            })
            .collect()
    }

    /// Rows for one value, in replication order.
    pub fn rows_for<'a>(&'a self, value: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.value == value)
    }
}

/// Runs `replications` paired replications for every value. Runs execute in
/// parallel; rows are ordered by (value, replication).
pub fn sweep(
    base: &ScenarioConfig,
    param: SweepParam,
    values: &[String],
    replications: usize,
) -> Result<SweepTable, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    if replications == 0 {
        return Err(ExperimentError::ZeroReplications);
    }
    let configs: Vec<ScenarioConfig> = values
        .iter()
        .map(|v| param.apply(base, v))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|vi| (0..replications).map(move |r| (vi, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(vi, rep)| {
            let mut cfg = configs[vi].clone();
            cfg.run.seed = replication_seed(base.run.seed, rep);
            let result = run_scenario(&cfg)?;
            Ok(SweepRow {
                param: param.as_str().to_string(),
                value: values[vi].clone(),
                rep,
                seed: cfg.run.seed,
                lambda_hat: result.final_estimate.as_ref().map(|e| e.lambda_hat),
                rel_error: result.relative_error,
                mean_latency_s: result.mean_latency_s,
                drops: result.dropped,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mut table = SweepTable {
        param,
        values: values.to_vec(),
        replications,
        rows,
        summaries: Vec::new(),
    };
    table.summaries = table.recompute_summaries();
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub discipline: Discipline,
    pub mean_rel_error: Option<f64>,
    pub mean_latency_s: Option<f64>,
    pub drops: u64,
}

/// Same topology and paired seeds for every discipline.
pub fn compare(
    base: &ScenarioConfig,
    disciplines: &[Discipline],
    replications: usize,
) -> Result<(SweepTable, Vec<CompareRow>), ExperimentError> {
    if disciplines.len() < 2 {
        return Err(ExperimentError::TooFewDisciplines(disciplines.len()));
    }
    let values: Vec<String> = disciplines.iter().map(|d| d.as_str().to_string()).collect();
    let table = sweep(base, SweepParam::Discipline, &values, replications)?;
    let rows = disciplines
        .iter()
        .map(|&d| {
            let rows: Vec<&SweepRow> = table.rows_for(d.as_str()).collect();
            let errs: Vec<f64> = rows.iter().filter_map(|r| r.rel_error).collect();
            let lat: Vec<f64> = rows.iter().filter_map(|r| r.mean_latency_s).collect();
            CompareRow {
                discipline: d,
                mean_rel_error: mean(&errs),
                mean_latency_s: mean(&lat),
                drops: rows.iter().map(|r| r.drops).sum(),
            }
        })
        .collect();
    Ok((table, rows))
}
