use std::collections::VecDeque;

use super::Topology;

/// Min-hop tree toward the base station.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingTree {
    parent: Vec<Option<usize>>,
    depth: Vec<u32>,
}

impl RoutingTree {
    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn depth(&self, node: usize) -> u32 {
        self.depth[node]
    }

    pub fn depths(&self) -> &[u32] {
        &self.depth
    }

    /// Nodes visited from `node` to the base station, inclusive of both.
    pub fn path(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut v = node;
        while let Some(p) = self.parent[v] {
            path.push(p);
            v = p;
        }
        path
    }

    /// Deepest node, lowest id on ties.
    pub fn deepest(&self) -> usize {
        let max = self.depth.iter().copied().max().unwrap_or(0);
        self.depth.iter().position(|&d| d == max).unwrap_or(0)
    }
}

/// Breadth-first layering from the base station. Each node's parent is the
/// geometrically nearest neighbor one layer closer, lowest id on ties.
///
/// The topology is expected to be connected; unreachable nodes would keep
/// `u32::MAX` depth and no parent.
pub fn build_routing_tree(topology: &Topology) -> RoutingTree {
    let n = topology.len();
    let base = topology.base_station();
    let mut depth = vec![u32::MAX; n];
    depth[base] = 0;
    let mut queue = VecDeque::from([base]);
    while let Some(v) = queue.pop_front() {
        for &w in topology.neighbors(v) {
            if depth[w] == u32::MAX {
                depth[w] = depth[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let parent = (0..n)
        .map(|v| {
            if v == base || depth[v] == u32::MAX {
                return None;
            }
            topology
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&w| depth[w] + 1 == depth[v])
                .min_by(|&a, &b| {
                    topology
                        .distance(v, a)
                        .total_cmp(&topology.distance(v, b))
                        .then(a.cmp(&b))
                })
        })
        .collect();
    RoutingTree { parent, depth }
}
