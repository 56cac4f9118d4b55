use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rateprivacy_core::adversary::{self, KsLevel, ObservationLog};
use rateprivacy_core::buffering::Discipline;
use rateprivacy_core::experiment::{self, ExperimentError, SweepParam};
use rateprivacy_core::validation::{run_validation, ValidateOptions};
use rateprivacy_core::{parse_config, parse_config_str, ScenarioConfig};

create_exception!(rateprivacy, ConfigError, PyValueError);

fn config_err(e: impl std::fmt::Display) -> PyErr {
    ConfigError::new_err(e.to_string())
}

fn experiment_err(e: ExperimentError) -> PyErr {
    match e {
        ExperimentError::Config(_)
        | ExperimentError::UnknownParameter(_)
        | ExperimentError::InvalidValue { .. }
        | ExperimentError::EmptySweep
        | ExperimentError::ZeroReplications
        | ExperimentError::TooFewDisciplines(_) => config_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A validated scenario. Build one from TOML text or a file, then refine it
/// with `key=value` overrides.
#[pyclass(name = "Scenario", module = "rateprivacy", frozen, from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (toml = "", overrides = Vec::new()))]
    fn new(toml: &str, overrides: Vec<String>) -> PyResult<Self> {
        let inner = parse_config_str(toml, &overrides).map_err(config_err)?;
        Ok(PyScenario { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn from_file(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        let inner = parse_config(&path, &overrides).map_err(config_err)?;
        Ok(PyScenario { inner })
    }

    /// Returns a copy with one `key=value` override applied.
    fn with_override(&self, assignment: &str) -> PyResult<Self> {
        let inner = self.inner.with_override(assignment).map_err(config_err)?;
        Ok(PyScenario { inner })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.run.seed
    }

    #[getter]
    fn lambda_per_s(&self) -> f64 {
        self.inner.source.lambda_per_s
    }

    #[getter]
    fn mu_per_s(&self) -> f64 {
        self.inner.service.mu_per_s
    }

    #[getter]
    fn buffer_q(&self) -> usize {
        self.inner.service.buffer_q
    }

    #[getter]
    fn discipline(&self) -> &'static str {
        self.inner.service.discipline.as_str()
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.run.duration_s
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(discipline={:?}, buffer_q={}, lambda_per_s={}, mu_per_s={}, seed={})",
            self.discipline(),
            self.buffer_q(),
            self.lambda_per_s(),
            self.mu_per_s(),
            self.seed()
        )
    }
}

#[pyclass(name = "RunResult", module = "rateprivacy", frozen)]
struct PyRunResult {
    inner: experiment::RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn lambda_true(&self) -> f64 {
        self.inner.lambda_true
    }

    #[getter]
    fn lambda_hat(&self) -> Option<f64> {
        self.inner.final_estimate.as_ref().map(|e| e.lambda_hat)
    }

    #[getter]
    fn relative_error(&self) -> Option<f64> {
        self.inner.relative_error
    }

    #[getter]
    fn mean_latency_s(&self) -> Option<f64> {
        self.inner.mean_latency_s
    }

    #[getter]
    fn generated(&self) -> u64 {
        self.inner.generated
    }

    #[getter]
    fn delivered(&self) -> u64 {
        self.inner.delivered
    }

    #[getter]
    fn resident(&self) -> u64 {
        self.inner.resident
    }

    #[getter]
    fn dropped(&self) -> u64 {
        self.inner.dropped
    }

    #[getter]
    fn conservation_ok(&self) -> bool {
        self.inner.conservation_ok
    }

    #[getter]
    fn active_sources(&self) -> Vec<usize> {
        self.inner.active_sources.clone()
    }

    /// Arrival instants seen by the eavesdropper at the base station.
    #[getter]
    fn observations(&self) -> Vec<f64> {
        self.inner.observations.times().to_vec()
    }

    /// Running estimates as `(t_s, n, lambda_hat)` tuples.
    #[getter]
    fn estimates(&self) -> Vec<(f64, usize, f64)> {
        self.inner.estimates.iter().map(|e| (e.at, e.n, e.lambda_hat)).collect()
    }

    /// End-to-end latencies of delivered real messages.
    #[getter]
    fn latencies(&self) -> Vec<f64> {
        self.inner.deliveries.iter().filter(|d| !d.is_dummy).map(|d| d.latency_s).collect()
    }

    fn summary_json(&self) -> String {
        String::from_utf8(experiment::render_summary_json(&self.inner)).expect("json is utf-8")
    }

    /// Writes arrivals.csv, estimates.csv and summary.json into `out_dir`.
    fn write_reports(&self, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        experiment::emit_run_reports(&self.inner, &out_dir).map_err(experiment_err)
    }
}

#[pyclass(name = "SweepTable", module = "rateprivacy", frozen)]
struct PySweepTable {
    inner: experiment::SweepTable,
}

#[pymethods]
impl PySweepTable {
    #[getter]
    fn param(&self) -> &'static str {
        self.inner.param.as_str()
    }

    #[getter]
    fn values(&self) -> Vec<String> {
        self.inner.values.clone()
    }

    /// One dict per (value, replication), in that order.
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("value", &r.value)?;
                d.set_item("rep", r.rep)?;
                d.set_item("seed", r.seed)?;
                d.set_item("lambda_hat", r.lambda_hat)?;
                d.set_item("rel_error", r.rel_error)?;
                d.set_item("mean_latency_s", r.mean_latency_s)?;
                d.set_item("drops", r.drops)?;
                Ok(d)
            })
            .collect()
    }

    /// Per-value quartile summaries of lambda_hat, rel_error and latency.
    fn summaries<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .summaries
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("value", &s.value)?;
                for (name, summary) in [
                    ("lambda_hat", &s.lambda_hat),
                    ("rel_error", &s.rel_error),
                    ("mean_latency_s", &s.mean_latency_s),
                ] {
                    let stats = summary.as_ref().map(|x| {
                        let m = PyDict::new(py);
                        m.set_item("n", x.n)?;
                        m.set_item("q1", x.q1)?;
                        m.set_item("median", x.median)?;
                        m.set_item("q3", x.q3)?;
                        m.set_item("iqr", x.iqr)?;
                        m.set_item("mean", x.mean)?;
                        Ok::<_, PyErr>(m)
                    });
                    d.set_item(name, stats.transpose()?)?;
                }
                d.set_item("drops", s.drops)?;
                Ok(d)
            })
            .collect()
    }

    fn to_csv(&self) -> String {
        String::from_utf8(experiment::render_sweep_csv(&self.inner)).expect("csv is utf-8")
    }

    /// Writes sweep.csv and sweep_summary.csv into `out_dir`.
    fn write_reports(&self, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        experiment::emit_sweep_reports(&self.inner, &out_dir).map_err(experiment_err)
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }
}

#[pyfunction]
fn run(py: Python<'_>, scenario: PyScenario) -> PyResult<PyRunResult> {
    let inner = py
        .detach(|| experiment::run_scenario(&scenario.inner))
        .map_err(experiment_err)?;
    Ok(PyRunResult { inner })
}

#[pyfunction]
#[pyo3(signature = (scenario, param, values, reps = 30))]
fn sweep(py: Python<'_>, scenario: PyScenario, param: &str, values: Vec<String>, reps: usize) -> PyResult<PySweepTable> {
    let param: SweepParam = param.parse().map_err(experiment_err)?;
    let inner = py
        .detach(|| experiment::sweep(&scenario.inner, param, &values, reps))
        .map_err(experiment_err)?;
    Ok(PySweepTable { inner })
}

/// Runs each discipline on identical topology and paired seeds. Returns
/// `(discipline, mean_rel_error, mean_latency_s, drops)` tuples.
#[pyfunction]
#[pyo3(signature = (scenario, disciplines, reps = 30))]
fn compare(
    py: Python<'_>,
    scenario: PyScenario,
    disciplines: Vec<String>,
    reps: usize,
) -> PyResult<Vec<(String, Option<f64>, Option<f64>, u64)>> {
    let disciplines = disciplines
        .iter()
        .map(|d| d.parse::<Discipline>().map_err(config_err))
        .collect::<PyResult<Vec<_>>>()?;
    let (_, rows) = py
        .detach(|| experiment::compare(&scenario.inner, &disciplines, reps))
        .map_err(experiment_err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.discipline.as_str().to_string(), r.mean_rel_error, r.mean_latency_s, r.drops))
        .collect())
}

fn log_from(times: Vec<f64>) -> PyResult<ObservationLog> {
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(PyValueError::new_err("arrival times must be non-decreasing"));
    }
    Ok(ObservationLog::from_times(times))
}

/// Inter-arrival rate estimate `(n - 1) / (t_n - t_1)`.
#[pyfunction]
fn estimate_interarrival(times: Vec<f64>) -> PyResult<f64> {
    let log = log_from(times)?;
    adversary::estimate_interarrival(log.view())
        .map(|e| e.lambda_hat)
        .map_err(value_err)
}

/// Arrivals in `[start, end]` over the window length.
#[pyfunction]
fn estimate_count(times: Vec<f64>, start: f64, end: f64) -> PyResult<f64> {
    let log = log_from(times)?;
    adversary::estimate_count(&log, start, end)
        .map(|e| e.lambda_hat)
        .map_err(value_err)
}

#[pyfunction]
fn crlb_variance(lambda_: f64, n: usize) -> PyResult<f64> {
    adversary::crlb_variance(lambda_, n).map_err(value_err)
}

#[pyfunction]
fn relative_error(lambda_hat: f64, lambda_true: f64) -> PyResult<f64> {
    if !(lambda_true > 0.0) {
        return Err(PyValueError::new_err("lambda_true must be positive"));
    }
    Ok(adversary::relative_error(lambda_hat, lambda_true))
}

/// One-sample KS test of `gaps` against Exp(rate). Returns
/// `(statistic, critical_value, passed)`.
#[pyfunction]
#[pyo3(signature = (gaps, rate, alpha = 0.01))]
fn ks_exponential(gaps: Vec<f64>, rate: f64, alpha: f64) -> PyResult<(f64, f64, bool)> {
    let level = if alpha == 0.01 {
        KsLevel::Alpha01
    } else if alpha == 0.05 {
        KsLevel::Alpha05
    } else {
        return Err(PyValueError::new_err("alpha must be 0.01 or 0.05"));
    };
    let out = adversary::ks_exponential(&gaps, rate, level).map_err(value_err)?;
    Ok((out.statistic, out.critical, out.passed))
}

/// `(q1, median, q3, iqr)` with linear interpolation between order statistics.
#[pyfunction]
fn quartiles(samples: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let q = experiment::quartiles(&samples).map_err(value_err)?;
    Ok((q.q1, q.median, q.q3, q.iqr))
}

/// Runs the verification suite. Returns `(name, passed, detail)` per check.
#[pyfunction]
#[pyo3(signature = (seed = 42))]
fn validate(py: Python<'_>, seed: u64) -> Vec<(String, bool, String)> {
    py.detach(|| run_validation(&ValidateOptions { seed, tamper_sampler: false }))
        .into_iter()
        .map(|o| (o.name.to_string(), o.passed, o.detail))
        .collect()
}

#[pymodule]
fn rateprivacy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PySweepTable>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_interarrival, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_count, m)?)?;
    m.add_function(wrap_pyfunction!(crlb_variance, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(ks_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(quartiles, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add("__version__", experiment::VERSION)?;
    Ok(())
}
