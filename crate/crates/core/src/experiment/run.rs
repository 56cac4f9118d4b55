use std::fs::File;

use serde::Serialize;

use super::stats::{quartiles, Quartiles};
use super::ExperimentError;
use crate::adversary::{estimate_interarrival, relative_error, running_estimates, ObservationLog, RateEstimate};
use crate::config::ScenarioConfig;
use crate::network::{build_routing_tree, build_topology, NetworkSim, SimOptions, Topology};
use crate::sim::{RngStream, SimTime};

/// Ground-truth record of one delivered real message (a row of arrivals.csv).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeliveryRecord {
    pub msg_id: u64,
    pub source_id: usize,
    pub created_s: f64,
    pub delivered_s: f64,
    pub latency_s: f64,
    pub hops: u32,
    pub is_dummy: bool,
}

/// Everything measured in one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub lambda_true: f64,
    pub active_sources: Vec<usize>,
    pub source_depths: Vec<u32>,
    pub topology_attempts: u32,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub resident: u64,
    pub transmissions: u64,
    pub mean_latency_s: Option<f64>,
    pub latency_quartiles: Option<Quartiles>,
    pub final_estimate: Option<RateEstimate>,
    pub relative_error: Option<f64>,
    pub estimates: Vec<RateEstimate>,
    /// `(node, drops)` for nodes with at least one drop.
    pub drops_by_node: Vec<(usize, u64)>,
    /// Delivered messages created at or after the warmup, dummies included.
    pub deliveries: Vec<DeliveryRecord>,
    pub observations: ObservationLog,
    /// Conservation held at every checkpoint and at the end of the run.
    pub conservation_ok: bool,
}

/// Topology for a scenario: the configured CSV, or random placement from the
/// `topology` stream. Returns the number of placement attempts used.
pub fn scenario_topology(config: &ScenarioConfig) -> Result<(Topology, u32), ExperimentError> {
    let f = &config.field;
    if let Some(path) = &f.topology_csv {
        let file = File::open(path).map_err(|source| ExperimentError::Io(crate::report::IoFailure {
            path: path.into(),
            source,
        }))?;
        return Ok((Topology::read_csv(file, f.field(), f.comm_radius_m)?, 0));
    }
    let mut stream = RngStream::new(config.run.seed, "topology");
    Ok(build_topology(
        f.node_count,
        f.field(),
        f.comm_radius_m,
        f.max_topology_attempts,
        &mut stream,
    )?)
}

/// Builds the network for `config` without running it.
pub fn build_simulation(
    config: &ScenarioConfig,
    trace: bool,
) -> Result<(NetworkSim, u32), ExperimentError> {
    config.validate()?;
    let (topology, attempts) = scenario_topology(config)?;
    let tree = build_routing_tree(&topology);
    let options = SimOptions {
        observe_from: config.run.warmup_s,
        checkpoint_every: Some(config.run.checkpoint_every_s),
        trace,
        tamper_sampler: false,
    };
    let sim = NetworkSim::new(
        topology,
        tree,
        config.source.clone(),
        config.service.clone(),
        config.run.seed,
        options,
    )?;
    Ok((sim, attempts))
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResult, ExperimentError> {
    let (mut sim, attempts) = build_simulation(config, false)?;
    sim.run_until(SimTime::from_secs(config.run.duration_s))?;
    Ok(summarize_run(config, &sim, attempts))
}

/// Mean `delivered - created` over real (non-dummy) deliveries.
pub fn mean_latency(deliveries: &[DeliveryRecord]) -> Result<f64, ExperimentError> {
    let real: Vec<f64> = deliveries.iter().filter(|d| !d.is_dummy).map(|d| d.latency_s).collect();
    if real.is_empty() {
        return Err(ExperimentError::NoDeliveries);
    }
    Ok(real.iter().sum::<f64>() / real.len() as f64)
}

pub fn summarize_run(config: &ScenarioConfig, sim: &NetworkSim, topology_attempts: u32) -> RunResult {
    let warmup = config.run.warmup_s;
    let deliveries: Vec<DeliveryRecord> = sim
        .deliveries()
        .iter()
        .map(|&id| &sim.messages()[id as usize])
        .filter(|m| m.created_at.secs() >= warmup)
        .map(|m| {
            let delivered = m.delivered_at.expect("delivered message has a time").secs();
            DeliveryRecord {
                msg_id: m.id,
                source_id: m.source,
                created_s: m.created_at.secs(),
                delivered_s: delivered,
                latency_s: delivered - m.created_at.secs(),
                hops: m.hops,
                is_dummy: m.is_dummy,
            }
        })
        .collect();
    let latencies: Vec<f64> = deliveries.iter().filter(|d| !d.is_dummy).map(|d| d.latency_s).collect();
    let lambda_true = sim.true_rate();
    let observations = sim.observation().clone();
    let final_estimate = estimate_interarrival(observations.view())
        .ok()
        .filter(|e| e.lambda_hat.is_finite());
    let relative_error = final_estimate
        .as_ref()
        .map(|e| relative_error(e.lambda_hat, lambda_true));
    let estimates = running_estimates(&observations, config.run.checkpoint_every_s, config.run.duration_s)
        .into_iter()
        .filter(|e| e.lambda_hat.is_finite())
        .collect();
    let drops_by_node = (0..sim.topology().len())
        .map(|v| (v, sim.drops_at(v)))
        .filter(|&(_, d)| d > 0)
        .collect();
    let conservation_ok =
        sim.conservation_holds() && sim.checkpoints().iter().all(|c| c.balanced());
    RunResult {
        config: config.clone(),
        lambda_true,
        active_sources: sim.active_sources().to_vec(),
        source_depths: sim.active_sources().iter().map(|&v| sim.tree().depth(v)).collect(),
        topology_attempts,
        generated: sim.generated(),
        delivered: sim.delivered(),
        dropped: sim.dropped(),
        resident: sim.resident(),
        transmissions: sim.transmissions(),
        mean_latency_s: mean_latency(&deliveries).ok(),
        latency_quartiles: quartiles(&latencies).ok(),
        final_estimate,
        relative_error,
        estimates,
        drops_by_node,
        deliveries,
        observations,
        conservation_ok,
    }
}
