//! CSV and JSON report files.
//!
//! All numbers carry at most 9 significant digits; CSV files are
//! comma-separated with a header row and `\n` line endings.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::run::RunResult;
use super::stats::Summary;
use super::sweep::{CompareRow, SweepTable};
use super::ExperimentError;
use crate::adversary::write_estimates_csv;
use crate::report::{fmt_num, fmt_opt, round_json, write_all_atomic};

pub const ARTIFACT: &str = "rateprivacy";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn csv_bytes<F>(header: &[&str], fill: F) -> Vec<u8>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).expect("in-memory csv write");
        fill(&mut w).expect("in-memory csv write");
        w.flush().expect("in-memory csv flush");
    }
    buf
}

pub fn render_arrivals_csv(result: &RunResult) -> Vec<u8> {
    csv_bytes(
        &["msg_id", "source_id", "created_s", "delivered_s", "latency_s", "hops"],
        |w| {
            for d in result.deliveries.iter().filter(|d| !d.is_dummy) {
                w.write_record([
                    d.msg_id.to_string(),
                    d.source_id.to_string(),
                    fmt_num(d.created_s),
                    fmt_num(d.delivered_s),
                    fmt_num(d.latency_s),
                    d.hops.to_string(),
                ])?;
            }
            Ok(())
        },
    )
}

pub fn render_estimates_csv(result: &RunResult) -> Vec<u8> {
    let mut buf = Vec::new();
    write_estimates_csv(&result.estimates, &mut buf).expect("in-memory csv write");
    buf
}

pub fn render_summary_json(result: &RunResult) -> Vec<u8> {
    let q = result.latency_quartiles;
    let est = result.final_estimate.as_ref();
    let drops_by_node: serde_json::Map<String, Value> = result
        .drops_by_node
        .iter()
        .map(|(node, d)| (node.to_string(), json!(d)))
        .collect();
    let mut v = json!({
        "artifact": ARTIFACT,
        "version": VERSION,
        "config": result.config,
        "lambda_true_per_s": result.lambda_true,
        "active_sources": result.active_sources,
        "source_depths": result.source_depths,
        "topology_attempts": result.topology_attempts,
        "generated": result.generated,
        "delivered": result.delivered,
        "dropped": result.dropped,
        "resident": result.resident,
        "transmissions": result.transmissions,
        "measured_deliveries": result.deliveries.iter().filter(|d| !d.is_dummy).count(),
        "mean_latency_s": result.mean_latency_s,
        "latency_q1_s": q.map(|q| q.q1),
        "latency_median_s": q.map(|q| q.median),
        "latency_q3_s": q.map(|q| q.q3),
        "latency_iqr_s": q.map(|q| q.iqr),
        "lambda_hat_per_s": est.map(|e| e.lambda_hat),
        "estimate_n": est.map(|e| e.n),
        "estimate_method": est.map(|e| e.method.to_string()),
        "relative_error": result.relative_error,
        "observed_arrivals": result.observations.len(),
        "conservation_ok": result.conservation_ok,
        "drops_by_node": drops_by_node,
    });
    round_json(&mut v);
    let mut out = serde_json::to_vec_pretty(&v).expect("json serializes");
    out.push(b'\n');
    out
}

pub fn render_sweep_csv(table: &SweepTable) -> Vec<u8> {
    csv_bytes(
        &["param", "value", "rep", "seed", "lambda_hat_per_s", "rel_error", "mean_latency_s", "drops"],
        |w| {
            for r in &table.rows {
                w.write_record([
                    r.param.clone(),
                    r.value.clone(),
                    r.rep.to_string(),
                    r.seed.to_string(),
                    fmt_opt(r.lambda_hat),
                    fmt_opt(r.rel_error),
                    fmt_opt(r.mean_latency_s),
                    r.drops.to_string(),
                ])?;
            }
            Ok(())
        },
    )
}

const SUMMARY_STATS: [&str; 6] = ["n", "q1", "median", "q3", "iqr", "mean"];

fn summary_fields(s: Option<&Summary>) -> Vec<String> {
    match s {
        Some(s) => vec![
            s.n.to_string(),
            fmt_num(s.q1),
            fmt_num(s.median),
            fmt_num(s.q3),
            fmt_num(s.iqr),
            fmt_num(s.mean),
        ],
        None => vec!["0".into(), String::new(), String::new(), String::new(), String::new(), String::new()],
    }
}

/// One row per (value, metric) with quartiles, IQR and mean.
pub fn render_sweep_summary_csv(table: &SweepTable) -> Vec<u8> {
    let mut header = vec!["param", "value", "metric"];
    header.extend(SUMMARY_STATS);
    csv_bytes(&header, |w| {
        for s in &table.summaries {
            for (metric, summary) in [
                ("lambda_hat_per_s", s.lambda_hat.as_ref()),
                ("rel_error", s.rel_error.as_ref()),
                ("mean_latency_s", s.mean_latency_s.as_ref()),
            ] {
                let mut rec = vec![table.param.as_str().to_string(), s.value.clone(), metric.to_string()];
                rec.extend(summary_fields(summary));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })
}

pub fn render_compare_csv(rows: &[CompareRow]) -> Vec<u8> {
    csv_bytes(&["discipline", "mean_rel_error", "mean_latency_s", "drops"], |w| {
        for r in rows {
            w.write_record([
                r.discipline.to_string(),
                fmt_opt(r.mean_rel_error),
                fmt_opt(r.mean_latency_s),
                r.drops.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Writes arrivals.csv, estimates.csv and summary.json.
pub fn emit_run_reports(result: &RunResult, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let files = [
        ("arrivals.csv", render_arrivals_csv(result)),
        ("estimates.csv", render_estimates_csv(result)),
        ("summary.json", render_summary_json(result)),
    ];
    Ok(write_all_atomic(out_dir, &files)?)
}

/// Writes sweep.csv and sweep_summary.csv.
pub fn emit_sweep_reports(table: &SweepTable, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let files = [
        ("sweep.csv", render_sweep_csv(table)),
        ("sweep_summary.csv", render_sweep_summary_csv(table)),
    ];
    Ok(write_all_atomic(out_dir, &files)?)
}

/// Writes compare.csv and the underlying per-replication sweep.csv.
pub fn emit_compare_reports(
    table: &SweepTable,
    rows: &[CompareRow],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let files = [
        ("compare.csv", render_compare_csv(rows)),
        ("sweep.csv", render_sweep_csv(table)),
    ];
    Ok(write_all_atomic(out_dir, &files)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::experiment::{run_scenario, sweep, SweepParam};

    fn short() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.run.duration_s = 900.0;
        cfg
    }

    #[test]
    fn run_reports_written_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let result = run_scenario(&short()).unwrap();
        let paths = emit_run_reports(&result, dir.path()).unwrap();
        let names: Vec<_> = paths.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
        assert_eq!(names, ["arrivals.csv", "estimates.csv", "summary.json"]);
        let first: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        emit_run_reports(&result, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(first, second);

        let arrivals = String::from_utf8(first[0].clone()).unwrap();
        assert!(arrivals.starts_with("msg_id,source_id,created_s,delivered_s,latency_s,hops\n"));
        assert_eq!(arrivals.lines().count(), 1 + result.deliveries.len());
        let summary: Value = serde_json::from_slice(&first[2]).unwrap();
        assert_eq!(summary["config"]["service"]["buffer_q"], 20);
        assert_eq!(summary["version"], VERSION);
        assert_eq!(summary["generated"], result.generated);
    }

    #[test]
    fn sweep_csv_has_header_plus_rows() {
        let values = vec!["5".to_string(), "20".to_string()];
        let t = sweep(&short(), SweepParam::BufferQ, &values, 2).unwrap();
        let text = String::from_utf8(render_sweep_csv(&t)).unwrap();
        assert!(text.ends_with('\n'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 4);
        assert_eq!(lines[0], "param,value,rep,seed,lambda_hat_per_s,rel_error,mean_latency_s,drops");
        assert!(lines[1].starts_with("buffer_q,5,0,"));
        let summary = String::from_utf8(render_sweep_summary_csv(&t)).unwrap();
        assert_eq!(summary.lines().count(), 1 + 2 * 3);
    }

    #[test]
    fn unwritable_dir_is_io_failure() {
        let result = run_scenario(&short()).unwrap();
        let err = emit_run_reports(&result, Path::new("/proc/no-such-dir")).unwrap_err();
        assert!(matches!(err, ExperimentError::Io(_)));
    }
}
