//! Scenario configuration: defaults, TOML scenario files and `key=value`
//! overrides.
//!
//! A scenario file has up to four sections:
//!
//! ```toml
//! [field]
//! node_count = 100
//! comm_radius_m = 20
//!
//! [source]
//! interarrival_s = 5
//!
//! [service]
//! buffer_q = 20
//! discipline = "random-ladder"
//!
//! [run]
//! duration_s = 3600
//! seed = 42
//! ```
//!
//! Every key is optional. Overrides use the bare key (`buffer_q=20`) or the
//! qualified key (`service.buffer_q=20`) and are applied after the file.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::buffering::Discipline;
use crate::network::{Field, ServiceConfig, SourceConfig, SourceMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config")?;
        if !self.field.is_empty() {
            write!(f, " `{}`", self.field)?;
        }
        if let Some(line) = self.line {
            write!(f, " (line {line})")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// A recognised configuration key.
#[derive(Debug, Clone, Copy)]
pub struct Parameter {
    pub section: &'static str,
    pub key: &'static str,
    pub default: &'static str,
    pub unit: &'static str,
    pub help: &'static str,
}

pub const PARAMETERS: &[Parameter] = &[
    Parameter { section: "field", key: "node_count", default: "100", unit: "nodes", help: "nodes including the base station" },
    Parameter { section: "field", key: "width_m", default: "100", unit: "m", help: "field width" },
    Parameter { section: "field", key: "height_m", default: "100", unit: "m", help: "field height" },
    Parameter { section: "field", key: "comm_radius_m", default: "20", unit: "m", help: "communication radius" },
    Parameter { section: "field", key: "max_topology_attempts", default: "1000", unit: "attempts", help: "placement retries until connected" },
    Parameter { section: "field", key: "topology_csv", default: "(none)", unit: "path", help: "replay a topology CSV instead of random placement" },
    Parameter { section: "source", key: "mode", default: "poisson", unit: "-", help: "poisson | deterministic | poisson-plus-dummy" },
    Parameter { section: "source", key: "lambda_per_s", default: "0.2", unit: "1/s", help: "message rate per source (exclusive with interarrival_s)" },
    Parameter { section: "source", key: "interarrival_s", default: "5", unit: "s", help: "mean inter-arrival time, sets lambda = 1/value" },
    Parameter { section: "source", key: "interval_s", default: "600", unit: "s", help: "emission period in deterministic mode" },
    Parameter { section: "source", key: "dummy_rate_per_s", default: "0", unit: "1/s", help: "dummy rate per source in poisson-plus-dummy mode" },
    Parameter { section: "source", key: "active_sources", default: "(deepest node)", unit: "node ids", help: "list of source nodes" },
    Parameter { section: "service", key: "mu_per_s", default: "1.0", unit: "1/s", help: "service-clock rate per node" },
    Parameter { section: "service", key: "buffer_q", default: "20", unit: "slots", help: "buffer capacity" },
    Parameter { section: "service", key: "discipline", default: "random-ladder", unit: "-", help: "fifo | random-ladder | random-shuffle" },
    Parameter { section: "service", key: "hop_delay_s", default: "0", unit: "s", help: "transmission delay per hop" },
    Parameter { section: "service", key: "source_buffers", default: "true", unit: "bool", help: "sources buffer their own messages" },
    Parameter { section: "run", key: "duration_s", default: "3600", unit: "s", help: "simulated time" },
    Parameter { section: "run", key: "warmup_s", default: "0", unit: "s", help: "messages created earlier are not measured" },
    Parameter { section: "run", key: "checkpoint_every_s", default: "10", unit: "s", help: "running-estimate and conservation checkpoint spacing" },
    Parameter { section: "run", key: "seed", default: "42", unit: "-", help: "master seed" },
];

/// Table of every parameter, for usage text.
pub fn parameter_help() -> String {
    let mut out = String::from("Scenario parameters (section.key = default [unit]):\n");
    for p in PARAMETERS {
        out.push_str(&format!(
            "  {:<30} {:<16} [{}] {}\n",
            format!("{}.{}", p.section, p.key),
            p.default,
            p.unit,
            p.help
        ));
    }
    out
}

fn lookup(key: &str) -> Option<&'static Parameter> {
    match key.split_once('.') {
        Some((section, k)) => PARAMETERS.iter().find(|p| p.section == section && p.key == k),
        None => PARAMETERS.iter().find(|p| p.key == key),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub node_count: usize,
    pub width_m: f64,
    pub height_m: f64,
    pub comm_radius_m: f64,
    pub max_topology_attempts: u32,
    pub topology_csv: Option<String>,
}

impl FieldConfig {
    pub fn field(&self) -> Field {
        Field {
            width_m: self.width_m,
            height_m: self.height_m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub duration_s: f64,
    pub warmup_s: f64,
    pub checkpoint_every_s: f64,
    pub seed: u64,
}

/// Complete parameterization of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub field: FieldConfig,
    pub source: SourceConfig,
    pub service: ServiceConfig,
    pub run: RunConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            field: FieldConfig {
                node_count: 100,
                width_m: 100.0,
                height_m: 100.0,
                comm_radius_m: 20.0,
                max_topology_attempts: 1000,
                topology_csv: None,
            },
            source: SourceConfig {
                mode: SourceMode::Poisson,
                lambda_per_s: 0.2,
                interval_s: 600.0,
                dummy_rate_per_s: 0.0,
                active_sources: Vec::new(),
            },
            service: ServiceConfig {
                mu_per_s: 1.0,
                discipline: Discipline::RandomLadder,
                buffer_q: 20,
                hop_delay_s: 0.0,
                source_buffers: true,
            },
            run: RunConfig {
                duration_s: 3600.0,
                warmup_s: 0.0,
                checkpoint_every_s: 10.0,
                seed: 42,
            },
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = &self.field;
        if f.node_count < 2 {
            return Err(ConfigError::new("field.node_count", "must be at least 2"));
        }
        positive("field.width_m", f.width_m)?;
        positive("field.height_m", f.height_m)?;
        positive("field.comm_radius_m", f.comm_radius_m)?;
        if f.max_topology_attempts == 0 {
            return Err(ConfigError::new("field.max_topology_attempts", "must be at least 1"));
        }
        let s = &self.source;
        match s.mode {
            SourceMode::Poisson => positive("source.lambda_per_s", s.lambda_per_s)?,
            SourceMode::PoissonPlusDummy => {
                positive("source.lambda_per_s", s.lambda_per_s)?;
                positive("source.dummy_rate_per_s", s.dummy_rate_per_s)?;
            }
            SourceMode::Deterministic => positive("source.interval_s", s.interval_s)?,
        }
        if s.dummy_rate_per_s < 0.0 {
            return Err(ConfigError::new("source.dummy_rate_per_s", "must not be negative"));
        }
        let v = &self.service;
        positive("service.mu_per_s", v.mu_per_s)?;
        if v.buffer_q < 1 {
            return Err(ConfigError::new("service.buffer_q", "must be at least 1"));
        }
        if !(v.hop_delay_s >= 0.0 && v.hop_delay_s.is_finite()) {
            return Err(ConfigError::new("service.hop_delay_s", "must be non-negative"));
        }
        let r = &self.run;
        positive("run.duration_s", r.duration_s)?;
        if !(r.warmup_s >= 0.0 && r.warmup_s < r.duration_s) {
            return Err(ConfigError::new(
                "run.warmup_s",
                format!("must satisfy 0 <= warmup_s < duration_s ({})", r.duration_s),
            ));
        }
        positive("run.checkpoint_every_s", r.checkpoint_every_s)?;
        Ok(())
    }

    /// Applies a single `key=value` assignment through the same path as
    /// scenario-file overrides.
    pub fn with_override(&self, assignment: &str) -> Result<ScenarioConfig, ConfigError> {
        let text = toml::to_string(&self.to_file_table()).expect("config serializes");
        parse_config_str(&text, &[assignment.to_string()])
    }

    /// Scenario-file form of this config (rate given as `lambda_per_s`).
    fn to_file_table(&self) -> toml::Table {
        let mut root = toml::Table::new();
        let mut put = |section: &str, key: &str, value: toml::Value| {
            root.entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .expect("section is a table")
                .insert(key.to_string(), value);
        };
        use toml::Value as V;
        let f = &self.field;
        put("field", "node_count", V::Integer(f.node_count as i64));
        put("field", "width_m", V::Float(f.width_m));
        put("field", "height_m", V::Float(f.height_m));
        put("field", "comm_radius_m", V::Float(f.comm_radius_m));
        put("field", "max_topology_attempts", V::Integer(f.max_topology_attempts as i64));
        if let Some(p) = &f.topology_csv {
            put("field", "topology_csv", V::String(p.clone()));
        }
        let s = &self.source;
        put("source", "mode", V::String(s.mode.as_str().into()));
        put("source", "lambda_per_s", V::Float(s.lambda_per_s));
        put("source", "interval_s", V::Float(s.interval_s));
        put("source", "dummy_rate_per_s", V::Float(s.dummy_rate_per_s));
        put(
            "source",
            "active_sources",
            V::Array(s.active_sources.iter().map(|&v| V::Integer(v as i64)).collect()),
        );
        let v = &self.service;
        put("service", "mu_per_s", V::Float(v.mu_per_s));
        put("service", "buffer_q", V::Integer(v.buffer_q as i64));
        put("service", "discipline", V::String(v.discipline.as_str().into()));
        put("service", "hop_delay_s", V::Float(v.hop_delay_s));
        put("service", "source_buffers", V::Boolean(v.source_buffers));
        let r = &self.run;
        put("run", "duration_s", V::Float(r.duration_s));
        put("run", "warmup_s", V::Float(r.warmup_s));
        put("run", "checkpoint_every_s", V::Float(r.checkpoint_every_s));
        put("run", "seed", V::Integer(r.seed as i64));
        root
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    field: Option<RawField>,
    source: Option<RawSource>,
    service: Option<RawService>,
    run: Option<RawRun>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    node_count: Option<i64>,
    width_m: Option<f64>,
    height_m: Option<f64>,
    comm_radius_m: Option<f64>,
    max_topology_attempts: Option<i64>,
    topology_csv: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    mode: Option<String>,
    lambda_per_s: Option<f64>,
    interarrival_s: Option<f64>,
    interval_s: Option<f64>,
    dummy_rate_per_s: Option<f64>,
    active_sources: Option<Vec<i64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawService {
    mu_per_s: Option<f64>,
    buffer_q: Option<i64>,
    discipline: Option<String>,
    hop_delay_s: Option<f64>,
    source_buffers: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    duration_s: Option<f64>,
    warmup_s: Option<f64>,
    checkpoint_every_s: Option<f64>,
    seed: Option<i64>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `section.key` is assigned in a scenario file, if any.
fn find_key_line(text: &str, field: &str) -> Option<usize> {
    let (section, key) = field.split_once('.')?;
    let mut current = "";
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn toml_error(text: &str, err: toml::de::Error, field: &str) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        line: err.span().map(|s| line_of_offset(text, s.start)),
        message: err.message().to_string(),
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<String, ConfigError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new(assignment, "override must have the form key=value"))?;
    let param = lookup(key.trim())
        .ok_or_else(|| ConfigError::new(key.trim(), "unknown configuration key"))?;
    let mut value = parse_override_value(value);
    if param.key == "active_sources" {
        // Accept `1,2,3` as well as `[1, 2, 3]`.
        if let toml::Value::String(s) = &value {
            let ids: Result<Vec<toml::Value>, _> = s
                .split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| p.trim().parse::<i64>().map(toml::Value::Integer))
                .collect();
            value = toml::Value::Array(ids.map_err(|_| {
                ConfigError::new("source.active_sources", format!("not a node list: {s}"))
            })?);
        } else if let toml::Value::Integer(i) = value {
            value = toml::Value::Array(vec![toml::Value::Integer(i)]);
        }
    }
    let section = table
        .entry(param.section)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let section = section
        .as_table_mut()
        .ok_or_else(|| ConfigError::new(param.section, "must be a table"))?;
    match param.key {
        "lambda_per_s" => {
            section.remove("interarrival_s");
        }
        "interarrival_s" => {
            section.remove("lambda_per_s");
        }
        _ => {}
    }
    section.insert(param.key.to_string(), value);
    Ok(format!("{}.{}", param.section, param.key))
}

/// Parses scenario text and applies overrides in order.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    // First pass on the file alone, for line-accurate diagnostics.
    toml::from_str::<RawScenario>(text).map_err(|e| toml_error(text, e, ""))?;
    let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, e, ""))?;
    let mut overridden = Vec::new();
    for o in overrides {
        overridden.push(apply_override(&mut table, o)?);
    }
    let raw: RawScenario = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::new(overridden.join(","), e.message()))?;
    resolve(raw).map_err(|mut e| {
        if e.line.is_none() && !overridden.contains(&e.field) {
            e.line = find_key_line(text, &e.field);
        }
        e
    })
}

/// Reads and parses a scenario file.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigError::new(path.display().to_string(), format!("cannot read scenario file: {e}"))
    })?;
    parse_config_str(&text, overrides)
}

fn non_negative_int<T: TryFrom<i64>>(field: &str, v: i64) -> Result<T, ConfigError> {
    T::try_from(v).map_err(|_| ConfigError::new(field, format!("must be a non-negative integer, got {v}")))
}

fn resolve(raw: RawScenario) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    if let Some(f) = raw.field {
        if let Some(v) = f.node_count {
            cfg.field.node_count = non_negative_int("field.node_count", v)?;
        }
        if let Some(v) = f.width_m {
            cfg.field.width_m = v;
        }
        if let Some(v) = f.height_m {
            cfg.field.height_m = v;
        }
        if let Some(v) = f.comm_radius_m {
            cfg.field.comm_radius_m = v;
        }
        if let Some(v) = f.max_topology_attempts {
            cfg.field.max_topology_attempts = non_negative_int("field.max_topology_attempts", v)?;
        }
        cfg.field.topology_csv = f.topology_csv;
    }
    if let Some(s) = raw.source {
        if let Some(m) = s.mode {
            cfg.source.mode = m
                .parse()
                .map_err(|e: String| ConfigError::new("source.mode", e))?;
        }
        match (s.lambda_per_s, s.interarrival_s) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "source.interarrival_s",
                    "lambda_per_s and interarrival_s are mutually exclusive",
                ))
            }
            (Some(l), None) => cfg.source.lambda_per_s = l,
            (None, Some(ia)) => {
                positive("source.interarrival_s", ia)?;
                cfg.source.lambda_per_s = 1.0 / ia;
            }
            (None, None) => {}
        }
        if let Some(v) = s.interval_s {
            cfg.source.interval_s = v;
        }
        if let Some(v) = s.dummy_rate_per_s {
            cfg.source.dummy_rate_per_s = v;
        }
        if let Some(ids) = s.active_sources {
            cfg.source.active_sources = ids
                .into_iter()
                .map(|v| non_negative_int("source.active_sources", v))
                .collect::<Result<_, _>>()?;
        }
    }
    if let Some(v) = raw.service {
        if let Some(x) = v.mu_per_s {
            cfg.service.mu_per_s = x;
        }
        if let Some(x) = v.buffer_q {
            cfg.service.buffer_q = non_negative_int("service.buffer_q", x)?;
        }
        if let Some(d) = v.discipline {
            cfg.service.discipline = d
                .parse()
                .map_err(|e: crate::buffering::UnknownDiscipline| {
                    ConfigError::new("service.discipline", e.to_string())
                })?;
        }
        if let Some(x) = v.hop_delay_s {
            cfg.service.hop_delay_s = x;
        }
        if let Some(x) = v.source_buffers {
            cfg.service.source_buffers = x;
        }
    }
    if let Some(r) = raw.run {
        if let Some(x) = r.duration_s {
            cfg.run.duration_s = x;
        }
        if let Some(x) = r.warmup_s {
            cfg.run.warmup_s = x;
        }
        if let Some(x) = r.checkpoint_every_s {
            cfg.run.checkpoint_every_s = x;
        }
        if let Some(x) = r.seed {
            cfg.run.seed = x as u64;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
