//! Field topology, routing toward the base station, traffic sources and the
//! per-node forwarding processes.

mod routing;
mod sim;
mod source;
mod topology;

pub use routing::{build_routing_tree, RoutingTree};
pub use sim::{Checkpoint, HopRecord, Message, NetworkSim, Payload, SimOptions};
pub use source::{next_emission, Emission, ServiceConfig, SourceConfig, SourceMode};
pub use topology::{build_topology, build_topology_with, Field, Topology};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("topology still disconnected after {attempts} placement attempt(s)")]
    DisconnectedAfterRetries { attempts: u32 },
    #[error("a topology needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node {node} at ({x}, {y}) lies outside the field")]
    OutsideField { node: usize, x: f64, y: f64 },
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("node {0} is the base station and cannot be a source")]
    SourceIsBase(usize),
    #[error("topology csv: {0}")]
    TopologyCsv(String),
}
