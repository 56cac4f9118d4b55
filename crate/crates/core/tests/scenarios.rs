use std::io::Write;

use rateprivacy_core::buffering::Discipline;
use rateprivacy_core::experiment::{emit_run_reports, scenario_topology, sweep, SweepParam};
use rateprivacy_core::network::SourceMode;
use rateprivacy_core::{parse_config, parse_config_str, run_scenario, ScenarioConfig};

const SMALL: &str = r#"
[field]
node_count = 30
width_m = 60.0
height_m = 60.0
comm_radius_m = 20.0

[source]
mode = "poisson"
interarrival_s = 5.0

[service]
mu_per_s = 1.0
discipline = "fifo"
buffer_q = 10

[run]
duration_s = 600.0
seed = 7
"#;

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.toml");
    std::fs::write(&path, SMALL).unwrap();
    let cfg = parse_config(&path, &[]).unwrap();
    assert_eq!(cfg.field.node_count, 30);
    assert_eq!(cfg.source.lambda_per_s, 0.2);
    assert_eq!(cfg.service.discipline, Discipline::Fifo);
    assert_eq!(cfg.run.seed, 7);
    // Unspecified keys keep their defaults.
    assert_eq!(cfg.run.checkpoint_every_s, ScenarioConfig::default().run.checkpoint_every_s);
}

#[test]
fn overrides_replace_file_values() {
    let cfg = parse_config_str(
        SMALL,
        &["buffer_q=4".into(), "service.discipline=random-ladder".into(), "lambda_per_s=0.5".into()],
    )
    .unwrap();
    assert_eq!(cfg.service.buffer_q, 4);
    assert_eq!(cfg.service.discipline, Discipline::RandomLadder);
    assert_eq!(cfg.source.lambda_per_s, 0.5);
    assert_eq!(cfg.source.mode, SourceMode::Poisson);
}

#[test]
fn bad_files_report_field_and_line() {
    let text = SMALL.replace("buffer_q = 10", "buffer_q = 0");
    let err = parse_config_str(&text, &[]).unwrap_err();
    assert_eq!(err.field, "service.buffer_q");
    assert_eq!(err.line, Some(15));

    let err = parse_config_str(&SMALL.replace("fifo", "lifo"), &[]).unwrap_err();
    assert!(err.to_string().contains("lifo"), "{err}");

    let err = parse_config_str("[run]\nduraton_s = 5.0\n", &[]).unwrap_err();
    assert_eq!(err.line, Some(2));
}

#[test]
fn replayed_topology_reproduces_the_run() {
    let cfg = parse_config_str(SMALL, &[]).unwrap();
    let (topology, _) = scenario_topology(&cfg).unwrap();
    let mut csv = tempfile::NamedTempFile::new().unwrap();
    topology.write_csv(&mut csv).unwrap();
    csv.flush().unwrap();

    let mut replay = cfg.clone();
    replay.field.topology_csv = Some(csv.path().display().to_string());
    let (again, attempts) = scenario_topology(&replay).unwrap();
    assert_eq!(attempts, 0);
    // Coordinates are stored with 9 significant digits.
    for (p, q) in again.positions().iter().zip(topology.positions()) {
        assert!((p.0 - q.0).abs() < 1e-6 && (p.1 - q.1).abs() < 1e-6);
    }

    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&replay).unwrap();
    assert_eq!(a.deliveries, b.deliveries);
    assert_eq!(a.observations, b.observations);
}

#[test]
fn reports_land_in_the_output_directory() {
    let cfg = parse_config_str(SMALL, &[]).unwrap();
    let result = run_scenario(&cfg).unwrap();
    assert!(result.conservation_ok);
    let out = tempfile::tempdir().unwrap();
    let written = emit_run_reports(&result, out.path()).unwrap();
    assert_eq!(written.len(), 3);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["generated"], result.generated);
    let arrivals = std::fs::read_to_string(out.path().join("arrivals.csv")).unwrap();
    assert_eq!(arrivals.lines().count() as u64, 1 + result.deliveries.iter().filter(|d| !d.is_dummy).count() as u64);
}

#[test]
fn sweep_rows_are_ordered_and_paired() {
    let cfg = parse_config_str(SMALL, &[]).unwrap();
    let values: Vec<String> = ["2", "8"].iter().map(|s| s.to_string()).collect();
    let table = sweep(&cfg, SweepParam::BufferQ, &values, 3).unwrap();
    assert_eq!(table.rows.len(), 6);
    for (i, row) in table.rows.iter().enumerate() {
        assert_eq!(row.rep, i % 3);
        assert_eq!(row.seed, table.rows[i % 3].seed);
    }
}
