//! Per-node receive/forward processes driven by the event engine.

use serde::Serialize;

use super::{
    next_emission, Emission, NetworkError, RoutingTree, ServiceConfig, SourceConfig, Topology,
};
use crate::adversary::ObservationLog;
use crate::buffering::{DropReason, DropRecord, Insertion, SlottedBuffer};
use crate::sim::{Engine, Event, EventKind, RngStream, SimError, SimTime, TraceEntry};

/// A sensing report travelling toward the base station.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Message {
    pub id: u64,
    pub source: usize,
    pub created_at: SimTime,
    pub delivered_at: Option<SimTime>,
    pub hops: u32,
    pub is_dummy: bool,
}

/// One buffering stage of a message's journey.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HopRecord {
    pub node: usize,
    pub slot: usize,
    pub inserted_at: SimTime,
    /// Service firings the node had completed when the message was inserted.
    pub fires_at_insert: u64,
    pub departed_at: Option<SimTime>,
    /// Index of the firing that released the message.
    pub fires_at_departure: Option<u64>,
}

impl HopRecord {
    /// Number of firings the message waited through at this node.
    pub fn firings_waited(&self) -> Option<u64> {
        self.fires_at_departure.map(|f| f - self.fires_at_insert)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub at: SimTime,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub resident: u64,
}

impl Checkpoint {
    pub fn balanced(&self) -> bool {
        self.generated == self.delivered + self.dropped + self.resident
    }
}

#[derive(Clone, Debug)]
pub enum Payload {
    Emit { node: usize, emission: Emission },
    Fire { node: usize },
    Arrive { node: usize, msg: u64 },
    Observe { msg: u64 },
    Checkpoint,
}

#[derive(Clone, Debug, Default)]
pub struct SimOptions {
    /// Messages created before this instant are not logged by the adversary.
    pub observe_from: f64,
    pub checkpoint_every: Option<f64>,
    /// Keep the full `(fire_at, kind, sequence)` trace of processed events.
    pub trace: bool,
    /// Negative control for the validation suite: source gaps are drawn
    /// uniform on (0, 2/lambda] instead of exponentially.
    #[doc(hidden)]
    pub tamper_sampler: bool,
}

struct NodeState {
    buffer: SlottedBuffer<u64>,
    fires: u64,
    service_rng: RngStream,
    slot_rng: RngStream,
    source_rng: RngStream,
    dummy_rng: RngStream,
    departures: Vec<f64>,
    drops: u64,
}

struct NetworkState {
    topology: Topology,
    tree: RoutingTree,
    source: SourceConfig,
    service: ServiceConfig,
    options: SimOptions,
    active: Vec<usize>,
    nodes: Vec<NodeState>,
    messages: Vec<Message>,
    hops: Vec<Vec<HopRecord>>,
    drops: Vec<DropRecord>,
    observation: ObservationLog,
    deliveries: Vec<u64>,
    in_transit: u64,
    transmissions: u64,
    checkpoints: Vec<Checkpoint>,
}

/// A complete network run: topology, routing, sources, per-node buffers and
/// the adversary's observation point at the base station.
pub struct NetworkSim {
    engine: Engine<Payload>,
    state: NetworkState,
}

impl NetworkSim {
    pub fn new(
        topology: Topology,
        tree: RoutingTree,
        source: SourceConfig,
        service: ServiceConfig,
        master_seed: u64,
        options: SimOptions,
    ) -> Result<Self, NetworkError> {
        let base = topology.base_station();
        let active = if source.active_sources.is_empty() {
            vec![tree.deepest()]
        } else {
            source.active_sources.clone()
        };
        for &v in &active {
            if v >= topology.len() {
                return Err(NetworkError::UnknownNode(v));
            }
            if v == base {
                return Err(NetworkError::SourceIsBase(v));
            }
        }
        let nodes = (0..topology.len())
            .map(|v| NodeState {
                buffer: SlottedBuffer::new(service.buffer_q, service.discipline),
                fires: 0,
                service_rng: RngStream::new(master_seed, format!("service:{v}")),
                slot_rng: RngStream::new(master_seed, format!("slots:{v}")),
                source_rng: RngStream::new(master_seed, format!("source:{v}")),
                dummy_rng: RngStream::new(master_seed, format!("dummy:{v}")),
                departures: Vec::new(),
                drops: 0,
            })
            .collect();

        let mut engine = if options.trace {
            Engine::with_trace()
        } else {
            Engine::new()
        };
        let mut state = NetworkState {
            topology,
            tree,
            source,
            service,
            options,
            active,
            nodes,
            messages: Vec::new(),
            hops: Vec::new(),
            drops: Vec::new(),
            observation: ObservationLog::new(),
            deliveries: Vec::new(),
            in_transit: 0,
            transmissions: 0,
            checkpoints: Vec::new(),
        };
        state.prime(&mut engine);
        Ok(NetworkSim { engine, state })
    }

    pub fn run_until(&mut self, t_end: SimTime) -> Result<usize, SimError> {
        let state = &mut self.state;
        self.engine.run_until(t_end, |eng, ev| state.handle(eng, ev))
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn processed_events(&self) -> u64 {
        self.engine.processed()
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.engine.trace()
    }

    pub fn topology(&self) -> &Topology {
        &self.state.topology
    }

    pub fn tree(&self) -> &RoutingTree {
        &self.state.tree
    }

    pub fn active_sources(&self) -> &[usize] {
        &self.state.active
    }

    pub fn true_rate(&self) -> f64 {
        self.state.source.true_rate(self.state.active.len())
    }

    pub fn messages(&self) -> &[Message] {
        &self.state.messages
    }

    pub fn hop_records(&self, msg: u64) -> &[HopRecord] {
        &self.state.hops[msg as usize]
    }

    /// Delivered message ids in delivery order.
    pub fn deliveries(&self) -> &[u64] {
        &self.state.deliveries
    }

    pub fn drops(&self) -> &[DropRecord] {
        &self.state.drops
    }

    pub fn drops_at(&self, node: usize) -> u64 {
        self.state.nodes[node].drops
    }

    pub fn departures(&self, node: usize) -> &[f64] {
        &self.state.nodes[node].departures
    }

    pub fn observation(&self) -> &ObservationLog {
        &self.state.observation
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.state.checkpoints
    }

    pub fn occupancy(&self, node: usize) -> usize {
        self.state.nodes[node].buffer.occupancy()
    }

    pub fn service_firings(&self, node: usize) -> u64 {
        self.state.nodes[node].fires
    }

    pub fn transmissions(&self) -> u64 {
        self.state.transmissions
    }

    pub fn generated(&self) -> u64 {
        self.state.messages.len() as u64
    }

    pub fn delivered(&self) -> u64 {
        self.state.deliveries.len() as u64
    }

    pub fn dropped(&self) -> u64 {
        self.state.drops.len() as u64
    }

    /// Messages still in the network: buffered, or in flight between nodes.
    pub fn resident(&self) -> u64 {
        self.state.resident()
    }

    pub fn conservation_holds(&self) -> bool {
        self.generated() == self.delivered() + self.dropped() + self.resident()
    }
}

impl NetworkState {
    fn prime(&mut self, engine: &mut Engine<Payload>) {
        let now = engine.now();
        let mut on_path = vec![false; self.topology.len()];
        for i in 0..self.active.len() {
            let v = self.active[i];
            let first = self.draw_emission(v, Emission::Real, now);
            schedule(engine, first, EventKind::SourceEmit, Payload::Emit { node: v, emission: Emission::Real });
            if self.source.emits_dummies() {
                let first = self.draw_emission(v, Emission::Dummy, now);
                schedule(engine, first, EventKind::SourceEmit, Payload::Emit { node: v, emission: Emission::Dummy });
            }
            for (k, w) in self.tree.path(v).into_iter().enumerate() {
                let buffers_here = k > 0 || self.service.source_buffers;
                if buffers_here && w != self.topology.base_station() {
                    on_path[w] = true;
                }
            }
        }
        // Only nodes that can ever hold a message get a service clock. Each
        // clock draws from its own stream, so skipping idle nodes changes
        // nothing else in the run.
        for (v, used) in on_path.into_iter().enumerate() {
            if used {
                let gap = self.service_gap(v);
                engine.schedule_in(gap, EventKind::ServiceClockFire, Payload::Fire { node: v });
            }
        }
        if let Some(every) = self.options.checkpoint_every {
            engine.schedule_in(every, EventKind::MeasurementCheckpoint, Payload::Checkpoint);
        }
    }

    fn draw_emission(&mut self, node: usize, emission: Emission, now: SimTime) -> SimTime {
        let state = &mut self.nodes[node];
        let rng = match emission {
            Emission::Real => &mut state.source_rng,
            Emission::Dummy => &mut state.dummy_rng,
        };
        if self.options.tamper_sampler && emission == Emission::Real {
            return now + rng.uniform_open_closed() * 2.0 / self.source.lambda_per_s;
        }
        next_emission(&self.source, emission, rng, now)
    }

    fn service_gap(&mut self, node: usize) -> f64 {
        self.nodes[node]
            .service_rng
            .exponential(self.service.mu_per_s)
            .expect("validated service rate")
    }

    fn resident(&self) -> u64 {
        let buffered: usize = self.nodes.iter().map(|n| n.buffer.occupancy()).sum();
        buffered as u64 + self.in_transit
    }

    fn handle(&mut self, engine: &mut Engine<Payload>, event: Event<Payload>) {
        let now = event.fire_at;
        match event.payload {
            Payload::Emit { node, emission } => {
                let next = self.draw_emission(node, emission, now);
                schedule(engine, next, EventKind::SourceEmit, Payload::Emit { node, emission });
                let id = self.messages.len() as u64;
                self.messages.push(Message {
                    id,
                    source: node,
                    created_at: now,
                    delivered_at: None,
                    hops: 0,
                    is_dummy: emission == Emission::Dummy,
                });
                self.hops.push(Vec::new());
                if self.service.source_buffers {
                    self.receive(node, id, now);
                } else {
                    self.forward(engine, node, id);
                }
            }
            Payload::Fire { node } => {
                let state = &mut self.nodes[node];
                state.fires += 1;
                let fires = state.fires;
                if let Some(id) = state.buffer.on_service_fire() {
                    state.departures.push(now.secs());
                    if let Some(hop) = self.hops[id as usize].last_mut() {
                        hop.departed_at = Some(now);
                        hop.fires_at_departure = Some(fires);
                    }
                    self.forward(engine, node, id);
                }
                let gap = self.service_gap(node);
                engine.schedule_in(gap, EventKind::ServiceClockFire, Payload::Fire { node });
            }
            Payload::Arrive { node, msg } => {
                self.in_transit -= 1;
                if node == self.topology.base_station() {
                    self.messages[msg as usize].delivered_at = Some(now);
                    self.deliveries.push(msg);
                    engine.schedule_in(0.0, EventKind::AdversaryObserve, Payload::Observe { msg });
                } else {
                    self.receive(node, msg, now);
                }
            }
            Payload::Observe { msg } => {
                // The adversary sees a timestamp only.
                if self.messages[msg as usize].created_at.secs() >= self.options.observe_from {
                    self.observation.record(now);
                }
            }
            Payload::Checkpoint => {
                let cp = Checkpoint {
                    at: now,
                    generated: self.messages.len() as u64,
                    delivered: self.deliveries.len() as u64,
                    dropped: self.drops.len() as u64,
                    resident: self.resident(),
                };
                self.checkpoints.push(cp);
                if let Some(every) = self.options.checkpoint_every {
                    engine.schedule_in(every, EventKind::MeasurementCheckpoint, Payload::Checkpoint);
                }
            }
        }
    }

    fn receive(&mut self, node: usize, msg: u64, now: SimTime) {
        let state = &mut self.nodes[node];
        match state.buffer.insert(msg, &mut state.slot_rng) {
            Insertion::Placed(slot) => self.hops[msg as usize].push(HopRecord {
                node,
                slot,
                inserted_at: now,
                fires_at_insert: state.fires,
                departed_at: None,
                fires_at_departure: None,
            }),
            Insertion::Dropped(msg) => {
                state.drops += 1;
                self.drops.push(DropRecord {
                    message: msg,
                    node,
                    time: now.secs(),
                    reason: DropReason::BufferFull,
                });
            }
        }
    }

    fn forward(&mut self, engine: &mut Engine<Payload>, from: usize, msg: u64) {
        let parent = self
            .tree
            .parent(from)
            .expect("non-base nodes have a parent");
        self.messages[msg as usize].hops += 1;
        self.transmissions += 1;
        self.in_transit += 1;
        engine.schedule_in(
            self.service.hop_delay_s,
            EventKind::MessageArrival,
            Payload::Arrive { node: parent, msg },
        );
    }
}

fn schedule(engine: &mut Engine<Payload>, at: SimTime, kind: EventKind, payload: Payload) {
    engine
        .schedule(at, kind, payload)
        .expect("emission times never precede the clock");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffering::Discipline;
    use crate::network::{build_routing_tree, Field, SourceMode};

    const FIELD: Field = Field {
        width_m: 100.0,
        height_m: 100.0,
    };

    fn chain(n: usize) -> Topology {
        let positions = (0..n).map(|i| (10.0 * i as f64, 0.0)).collect();
        Topology::new(positions, FIELD, 10.0, 0).unwrap()
    }

    fn source(lambda: f64) -> SourceConfig {
        SourceConfig {
            mode: SourceMode::Poisson,
            lambda_per_s: lambda,
            interval_s: 1.0 / lambda,
            dummy_rate_per_s: 0.0,
            active_sources: vec![],
        }
    }

    fn service(discipline: Discipline, q: usize) -> ServiceConfig {
        ServiceConfig {
            mu_per_s: 1.0,
            discipline,
            buffer_q: q,
            hop_delay_s: 0.0,
            source_buffers: true,
        }
    }

    fn sim(n: usize, src: SourceConfig, svc: ServiceConfig, options: SimOptions) -> NetworkSim {
        let topo = chain(n);
        let tree = build_routing_tree(&topo);
        NetworkSim::new(topo, tree, src, svc, 42, options).unwrap()
    }

    #[test]
    fn delivered_hops_equal_source_depth() {
        let mut s = sim(4, source(0.2), service(Discipline::RandomLadder, 20), SimOptions::default());
        s.run_until(SimTime::from_secs(3600.0)).unwrap();
        assert_eq!(s.active_sources(), &[3]);
        assert!(s.delivered() > 500);
        for &id in s.deliveries() {
            let m = &s.messages()[id as usize];
            assert_eq!(m.hops, 3);
            assert!(m.delivered_at.unwrap() > m.created_at);
            assert_eq!(s.hop_records(id).len(), 3);
        }
        assert!(s.conservation_holds());
    }

    #[test]
    fn source_without_own_buffer_skips_first_stage() {
        let mut svc = service(Discipline::Fifo, 20);
        svc.source_buffers = false;
        let mut s = sim(3, source(0.2), svc, SimOptions::default());
        s.run_until(SimTime::from_secs(1000.0)).unwrap();
        assert_eq!(s.service_firings(2), 0);
        for &id in s.deliveries() {
            let hops = s.hop_records(id);
            assert_eq!(hops.len(), 1);
            assert_eq!(hops[0].node, 1);
            assert_eq!(s.messages()[id as usize].hops, 2);
        }
    }

    #[test]
    fn full_buffers_drop_and_conserve() {
        // Arrivals far faster than service with a one-slot buffer.
        let mut s = sim(2, source(5.0), service(Discipline::Fifo, 1), SimOptions {
            checkpoint_every: Some(10.0),
            ..SimOptions::default()
        });
        s.run_until(SimTime::from_secs(200.0)).unwrap();
        assert!(s.dropped() > 0);
        assert_eq!(s.drops_at(1), s.dropped());
        assert!(s.drops().iter().all(|d| d.node == 1 && d.reason == DropReason::BufferFull));
        assert_eq!(s.checkpoints().len(), 20);
        assert!(s.checkpoints().iter().all(Checkpoint::balanced));
        assert!(s.conservation_holds());
    }

    #[test]
    fn hop_delay_keeps_messages_in_transit() {
        let mut svc = service(Discipline::Fifo, 20);
        svc.hop_delay_s = 0.5;
        let mut s = sim(3, source(1.0), svc, SimOptions {
            checkpoint_every: Some(0.1),
            ..SimOptions::default()
        });
        s.run_until(SimTime::from_secs(500.0)).unwrap();
        assert!(s.checkpoints().iter().all(Checkpoint::balanced));
        for &id in s.deliveries() {
            let m = &s.messages()[id as usize];
            assert!(m.delivered_at.unwrap().secs() - m.created_at.secs() >= 1.0);
        }
    }

    #[test]
    fn clock_keeps_firing_on_empty_buffer() {
        let mut s = sim(2, source(0.001), service(Discipline::RandomLadder, 5), SimOptions::default());
        s.run_until(SimTime::from_secs(100.0)).unwrap();
        assert!(s.service_firings(1) > 50);
    }

    #[test]
    fn dummies_reach_the_adversary() {
        let mut src = source(0.2);
        src.mode = SourceMode::PoissonPlusDummy;
        src.dummy_rate_per_s = 0.2;
        let mut s = sim(2, src, service(Discipline::Fifo, 20), SimOptions::default());
        s.run_until(SimTime::from_secs(5000.0)).unwrap();
        let dummies = s.messages().iter().filter(|m| m.is_dummy).count();
        assert!(dummies > 0);
        assert_eq!(s.observation().len() as u64, s.delivered());
        assert_eq!(s.true_rate(), 0.2);
    }

    #[test]
    fn warmup_hides_early_messages_from_log() {
        let mut s = sim(2, source(0.5), service(Discipline::Fifo, 20), SimOptions {
            observe_from: 100.0,
            ..SimOptions::default()
        });
        s.run_until(SimTime::from_secs(300.0)).unwrap();
        let late = s
            .deliveries()
            .iter()
            .filter(|&&id| s.messages()[id as usize].created_at.secs() >= 100.0)
            .count();
        assert_eq!(s.observation().len(), late);
        assert!(late < s.deliveries().len());
    }

    #[test]
    fn base_station_cannot_be_a_source() {
        let topo = chain(2);
        let tree = build_routing_tree(&topo);
        let mut src = source(0.2);
        src.active_sources = vec![0];
        let err = NetworkSim::new(topo, tree, src, service(Discipline::Fifo, 5), 1, SimOptions::default());
        assert!(matches!(err, Err(NetworkError::SourceIsBase(0))));
    }
}
