//! Built-in verification suite: the statistical and structural checks the
//! simulator must pass before its sweeps are worth reading.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::adversary::{crlb_variance, estimate_interarrival, ks_exponential, relative_error, KsLevel, ObservationLog};
use crate::buffering::{Discipline, Insertion, SlottedBuffer};
use crate::config::ScenarioConfig;
use crate::experiment::{build_simulation, render_arrivals_csv, render_estimates_csv, render_summary_json, summarize_run, ExperimentError};
use crate::network::{build_routing_tree, Field, NetworkSim, ServiceConfig, SimOptions, SourceConfig, SourceMode, Topology};
use crate::sim::{RngStream, SimTime};

#[derive(Clone, Debug, Default)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Replace exponential source gaps with uniform ones in the Burke check.
    /// Negative control: that check must then fail.
    #[doc(hidden)]
    pub tamper_sampler: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const BURKE_DEPARTURES: usize = 100_000;
pub const BURKE_MAX_REL_ERROR: f64 = 0.02;
pub const CRLB_REPLICATIONS: usize = 1000;
pub const CRLB_GAPS: usize = 1000;
pub const CRLB_MAX_BIAS: f64 = 0.01;
pub const CRLB_VARIANCE_BAND: f64 = 0.15;
pub const SLOT_TRIALS: usize = 15_000;
pub const SLOT_MIN_P: f64 = 0.01;

/// Departure instants of a single FIFO relay (mu = 1) fed by a Poisson(0.2)
/// source that does not buffer its own messages. Returns the relay's first
/// `count` departures and the adversary log over the same span.
pub fn fifo_relay_departures(seed: u64, count: usize, tamper_sampler: bool) -> (Vec<f64>, ObservationLog) {
    let field = Field { width_m: 100.0, height_m: 100.0 };
    let topo = Topology::new(vec![(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], field, 10.0, 0)
        .expect("fixed chain is connected");
    let tree = build_routing_tree(&topo);
    let source = SourceConfig {
        mode: SourceMode::Poisson,
        lambda_per_s: 0.2,
        interval_s: 5.0,
        dummy_rate_per_s: 0.0,
        active_sources: vec![2],
    };
    let service = ServiceConfig {
        mu_per_s: 1.0,
        discipline: Discipline::Fifo,
        buffer_q: 64,
        hop_delay_s: 0.0,
        source_buffers: false,
    };
    let options = SimOptions {
        tamper_sampler,
        ..SimOptions::default()
    };
    let mut sim = NetworkSim::new(topo, tree, source, service, seed, options).expect("valid chain scenario");
    let mut horizon = 0.0;
    while sim.departures(1).len() < count {
        horizon += 100_000.0;
        sim.run_until(SimTime::from_secs(horizon)).expect("forward time");
    }
    let deps = sim.departures(1)[..count].to_vec();
    let log = ObservationLog::from_times(sim.observation().times()[..count].iter().copied());
    (deps, log)
}

pub fn check_burke(opts: &ValidateOptions) -> CheckOutcome {
    let (deps, log) = fifo_relay_departures(opts.seed, BURKE_DEPARTURES, opts.tamper_sampler);
    let gaps: Vec<f64> = deps.windows(2).map(|w| w[1] - w[0]).collect();
    let ks = ks_exponential(&gaps, 0.2, KsLevel::Alpha01).expect("enough gaps");
    let est = estimate_interarrival(log.view()).expect("enough arrivals");
    let err = relative_error(est.lambda_hat, 0.2);
    CheckOutcome {
        name: "burke-fifo-departures",
        passed: ks.passed && err < BURKE_MAX_REL_ERROR,
        detail: format!(
            "KS D={:.5} (critical {:.5}, n={}), lambda_hat={:.5}, rel_error={:.4}",
            ks.statistic, ks.critical, ks.n, est.lambda_hat, err
        ),
    }
}

/// Rate estimates from `reps` independent streams of `gaps` Exponential(`rate`) gaps.
pub fn synthetic_estimates(seed: u64, rate: f64, reps: usize, gaps: usize) -> Vec<f64> {
    (0..reps)
        .map(|r| {
            let mut s = RngStream::new(seed, format!("crlb:{r}"));
            let mut t = 0.0;
            let mut times = Vec::with_capacity(gaps + 1);
            times.push(0.0);
            for _ in 0..gaps {
                t += s.exponential(rate).expect("positive rate");
                times.push(t);
            }
            estimate_interarrival(ObservationLog::from_times(times).view())
                .expect("enough arrivals")
                .lambda_hat
        })
        .collect()
}

pub fn check_crlb(opts: &ValidateOptions) -> CheckOutcome {
    let rate = 0.2;
    let est = synthetic_estimates(opts.seed, rate, CRLB_REPLICATIONS, CRLB_GAPS);
    let n = est.len() as f64;
    let mean = est.iter().sum::<f64>() / n;
    let var = est.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let bound = crlb_variance(rate, CRLB_GAPS).expect("valid bound");
    let bias = (mean - rate).abs() / rate;
    let ratio = var / bound;
    CheckOutcome {
        name: "crlb-attainment",
        passed: bias < CRLB_MAX_BIAS && (ratio - 1.0).abs() <= CRLB_VARIANCE_BAND,
        detail: format!("bias={bias:.5}, variance={var:.4e}, bound={bound:.4e}, ratio={ratio:.4}"),
    }
}

/// Slot counts from `trials` insertions into copies of a frozen q=20 buffer
/// with slots 0, 4, 8, 12 and 16 occupied.
pub fn frozen_slot_counts(seed: u64, trials: usize) -> Vec<u64> {
    let mut slots: Vec<Option<u32>> = vec![None; 20];
    for k in 0..5 {
        slots[4 * k] = Some(k as u32);
    }
    let frozen = SlottedBuffer::from_slots(slots, Discipline::RandomLadder);
    let mut rng = RngStream::new(seed, "validate:slots");
    let mut counts = vec![0u64; 20];
    for _ in 0..trials {
        match frozen.clone().insert(99, &mut rng) {
            Insertion::Placed(s) => counts[s] += 1,
            Insertion::Dropped(_) => unreachable!("frozen buffer has room"),
        }
    }
    counts
}

/// Chi-square p-value of `counts` against a uniform distribution.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = (counts.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

pub fn check_slot_uniformity(opts: &ValidateOptions) -> CheckOutcome {
    let counts = frozen_slot_counts(opts.seed, SLOT_TRIALS);
    let occupied_hits: u64 = (0..5).map(|k| counts[4 * k]).sum();
    let empty: Vec<u64> = counts.iter().enumerate().filter(|(i, _)| i % 4 != 0).map(|(_, &c)| c).collect();
    let p = chi_square_uniform_p(&empty);
    CheckOutcome {
        name: "slot-choice-uniformity",
        passed: occupied_hits == 0 && p > SLOT_MIN_P,
        detail: format!("p={p:.4} over {} empty slots, {occupied_hits} hits on occupied slots", empty.len()),
    }
}

fn default_run(seed: u64, trace: bool) -> Result<NetworkSim, ExperimentError> {
    let mut cfg = ScenarioConfig::default();
    cfg.run.seed = seed;
    let (mut sim, _) = build_simulation(&cfg, trace)?;
    sim.run_until(SimTime::from_secs(cfg.run.duration_s))?;
    Ok(sim)
}

/// Delivered messages whose every buffering stage took exactly slot + 1
/// firings, and the total number of delivered messages.
pub fn ladder_law_counts(sim: &NetworkSim) -> (usize, usize) {
    let ok = sim
        .deliveries()
        .iter()
        .filter(|&&id| {
            sim.hop_records(id)
                .iter()
                .all(|h| h.firings_waited() == Some(h.slot as u64 + 1))
        })
        .count();
    (ok, sim.deliveries().len())
}

pub fn check_ladder_law(opts: &ValidateOptions) -> CheckOutcome {
    match default_run(opts.seed, false) {
        Ok(sim) => {
            let (ok, total) = ladder_law_counts(&sim);
            CheckOutcome {
                name: "ladder-wait-law",
                passed: total > 0 && ok == total,
                detail: format!("{ok}/{total} delivered messages obey firings = slot + 1"),
            }
        }
        Err(e) => failed("ladder-wait-law", e),
    }
}

pub fn check_conservation(opts: &ValidateOptions) -> CheckOutcome {
    let mut stressed = ScenarioConfig::default();
    stressed.run.seed = opts.seed;
    stressed.source.lambda_per_s = 2.0;
    stressed.service.buffer_q = 2;
    let mut details = Vec::new();
    let mut passed = true;
    for (label, cfg) in [("default", ScenarioConfig { run: stressed.run.clone(), ..ScenarioConfig::default() }), ("overloaded", stressed)] {
        match build_simulation(&cfg, false).and_then(|(mut sim, _)| {
            sim.run_until(SimTime::from_secs(cfg.run.duration_s))?;
            Ok(sim)
        }) {
            Ok(sim) => {
                let cps = sim.checkpoints();
                let bad = cps.iter().filter(|c| !c.balanced()).count();
                passed &= bad == 0 && sim.conservation_holds();
                details.push(format!(
                    "{label}: {} checkpoints, {bad} unbalanced, generated={} delivered={} resident={} dropped={}",
                    cps.len(),
                    sim.generated(),
                    sim.delivered(),
                    sim.resident(),
                    sim.dropped()
                ));
            }
            Err(e) => return failed("conservation", e),
        }
    }
    CheckOutcome {
        name: "conservation",
        passed,
        detail: details.join("; "),
    }
}

pub fn check_determinism(opts: &ValidateOptions) -> CheckOutcome {
    let mut cfg = ScenarioConfig::default();
    cfg.run.seed = opts.seed;
    let once = || -> Result<(Vec<u8>, Vec<crate::sim::TraceEntry>), ExperimentError> {
        let (mut sim, attempts) = build_simulation(&cfg, true)?;
        sim.run_until(SimTime::from_secs(cfg.run.duration_s))?;
        let result = summarize_run(&cfg, &sim, attempts);
        let mut bytes = render_arrivals_csv(&result);
        bytes.extend(render_estimates_csv(&result));
        bytes.extend(render_summary_json(&result));
        Ok((bytes, sim.trace().unwrap_or_default().to_vec()))
    };
    match (once(), once()) {
        (Ok((ra, ta)), Ok((rb, tb))) => CheckOutcome {
            name: "determinism",
            passed: ra == rb && ta == tb,
            detail: format!("{} events replayed, reports {}", ta.len(), if ra == rb { "identical" } else { "differ" }),
        },
        (Err(e), _) | (_, Err(e)) => failed("determinism", e),
    }
}

fn failed(name: &'static str, e: ExperimentError) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: false,
        detail: format!("error: {e}"),
    }
}

/// Runs all six checks in a fixed order.
pub fn run_validation(opts: &ValidateOptions) -> Vec<CheckOutcome> {
    vec![
        check_burke(opts),
        check_crlb(opts),
        check_slot_uniformity(opts),
        check_ladder_law(opts),
        check_conservation(opts),
        check_determinism(opts),
    ]
}
