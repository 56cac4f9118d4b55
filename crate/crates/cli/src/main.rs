use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rateprivacy_core::buffering::Discipline;
use rateprivacy_core::config::parameter_help;
use rateprivacy_core::experiment::{
    compare, emit_compare_reports, emit_run_reports, emit_sweep_reports, run_scenario, scenario_topology, sweep,
    ExperimentError, SweepParam,
};
use rateprivacy_core::report::{fmt_opt, write_atomic, IoFailure};
use rateprivacy_core::validation::{run_validation, ValidateOptions};
use rateprivacy_core::{parse_config, parse_config_str, ConfigError, ScenarioConfig};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "rateprivacy", version, about = "Simulate rate-privacy buffering in multi-hop sensor networks")]
#[command(after_long_help = parameter_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write arrivals.csv, estimates.csv and summary.json
    #[command(after_long_help = parameter_help())]
    Run(Common),
    /// Sweep one parameter over paired replications
    #[command(after_long_help = parameter_help())]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// buffer_q, interarrival_s, discipline or mu
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 30)]
        reps: usize,
    },
    /// Compare buffer disciplines on identical topology and seeds
    #[command(after_long_help = parameter_help())]
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "fifo,random-ladder")]
        disciplines: Vec<String>,
        #[arg(long, default_value_t = 30)]
        reps: usize,
    },
    /// Run the built-in verification suite
    Validate {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Replace the source sampler with a non-exponential one (negative control)
        #[arg(long, hide = true)]
        tamper_sampler: bool,
    },
    /// Write the scenario topology to topology.csv
    #[command(after_long_help = parameter_help())]
    Topo(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML with [field], [source], [service], [run])
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Master seed (overrides run.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Override a scenario parameter, e.g. --set buffer_q=20
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Config(String),
    Runtime(String),
    Validation,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<IoFailure> for Failure {
    fn from(e: IoFailure) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_)
            | ExperimentError::UnknownParameter(_)
            | ExperimentError::InvalidValue { .. }
            | ExperimentError::EmptySweep
            | ExperimentError::ZeroReplications
            | ExperimentError::TooFewDisciplines(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    Ok(match &common.config {
        Some(path) => parse_config(path, &overrides)?,
        None => parse_config_str("", &overrides)?,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|source| Failure::Runtime(IoFailure { path: dir.into(), source }.to_string()))
}

fn cmd_run(common: Common) -> Result<(), Failure> {
    let cfg = load(&common)?;
    let result = run_scenario(&cfg)?;
    ensure_dir(&common.out)?;
    let written = emit_run_reports(&result, &common.out)?;
    println!(
        "lambda_true={} lambda_hat={} rel_error={} mean_latency_s={}",
        result.lambda_true,
        fmt_opt(result.final_estimate.as_ref().map(|e| e.lambda_hat)),
        fmt_opt(result.relative_error),
        fmt_opt(result.mean_latency_s)
    );
    println!(
        "generated={} delivered={} resident={} dropped={}",
        result.generated, result.delivered, result.resident, result.dropped
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(common: Common, param: &str, values: &[String], reps: usize) -> Result<(), Failure> {
    let param: SweepParam = param.parse()?;
    let cfg = load(&common)?;
    let table = sweep(&cfg, param, values, reps)?;
    ensure_dir(&common.out)?;
    let written = emit_sweep_reports(&table, &common.out)?;
    println!("{:>16} {:>12} {:>12} {:>12} {:>8}", param.as_str(), "iqr_lambda", "rel_error", "latency_s", "drops");
    for s in &table.summaries {
        println!(
            "{:>16} {:>12} {:>12} {:>12} {:>8}",
            s.value,
            fmt_opt(s.lambda_hat.as_ref().map(|x| x.iqr)),
            fmt_opt(s.rel_error.as_ref().map(|x| x.mean)),
            fmt_opt(s.mean_latency_s.as_ref().map(|x| x.mean)),
            s.drops
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_compare(common: Common, names: &[String], reps: usize) -> Result<(), Failure> {
    let disciplines = names
        .iter()
        .map(|n| n.parse::<Discipline>().map_err(|e| Failure::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = load(&common)?;
    let (table, rows) = compare(&cfg, &disciplines, reps)?;
    ensure_dir(&common.out)?;
    let written = emit_compare_reports(&table, &rows, &common.out)?;
    println!("{:>16} {:>14} {:>12} {:>8}", "discipline", "mean_rel_error", "latency_s", "drops");
    for r in &rows {
        println!(
            "{:>16} {:>14} {:>12} {:>8}",
            r.discipline.as_str(),
            fmt_opt(r.mean_rel_error),
            fmt_opt(r.mean_latency_s),
            r.drops
        );
    }
    let base = rows[0].mean_rel_error;
    for r in &rows[1..] {
        let ratio = match (r.mean_rel_error, base) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        println!(
            "rel_error ratio {} / {} = {}",
            r.discipline.as_str(),
            rows[0].discipline.as_str(),
            fmt_opt(ratio)
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_validate(seed: u64, tamper_sampler: bool) -> Result<(), Failure> {
    let outcomes = run_validation(&ValidateOptions { seed, tamper_sampler });
    for o in &outcomes {
        println!("{} {:<18} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    if outcomes.iter().all(|o| o.passed) {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn cmd_topo(common: Common) -> Result<(), Failure> {
    let cfg = load(&common)?;
    let (topology, attempts) = scenario_topology(&cfg)?;
    let mut csv = Vec::new();
    topology
        .write_csv(&mut csv)
        .map_err(|e| Failure::Runtime(format!("topology csv: {e}")))?;
    ensure_dir(&common.out)?;
    let path = common.out.join("topology.csv");
    write_atomic(&path, &csv)?;
    println!("{} nodes placed in {attempts} attempt(s)", topology.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Sweep { common, param, values, reps } => cmd_sweep(common, &param, &values, reps),
        Command::Compare { common, disciplines, reps } => cmd_compare(common, &disciplines, reps),
        Command::Validate { seed, tamper_sampler } => cmd_validate(seed, tamper_sampler),
        Command::Topo(common) => cmd_topo(common),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => {
            eprintln!("error: validation failed");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
