use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::report::fmt_num;
use crate::sim::RngStream;

/// Rectangular deployment area with the origin at one corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub width_m: f64,
    pub height_m: f64,
}

impl Field {
    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        (0.0..=self.width_m).contains(&x) && (0.0..=self.height_m).contains(&y)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width_m / 2.0, self.height_m / 2.0)
    }
}

/// Node placement plus the unit-disk connectivity graph it induces.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    positions: Vec<(f64, f64)>,
    field: Field,
    comm_radius: f64,
    base_station: usize,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Validates placement and connectivity. A disconnected graph is reported
    /// as [`NetworkError::DisconnectedAfterRetries`] with one attempt.
    pub fn new(
        positions: Vec<(f64, f64)>,
        field: Field,
        comm_radius: f64,
        base_station: usize,
    ) -> Result<Self, NetworkError> {
        let topo = Self::unchecked(positions, field, comm_radius, base_station)?;
        if !topo.is_connected() {
            return Err(NetworkError::DisconnectedAfterRetries { attempts: 1 });
        }
        Ok(topo)
    }

    fn unchecked(
        positions: Vec<(f64, f64)>,
        field: Field,
        comm_radius: f64,
        base_station: usize,
    ) -> Result<Self, NetworkError> {
        if positions.len() < 2 {
            return Err(NetworkError::TooFewNodes(positions.len()));
        }
        if base_station >= positions.len() {
            return Err(NetworkError::UnknownNode(base_station));
        }
        if let Some(i) = positions.iter().position(|&p| !field.contains(p)) {
            return Err(NetworkError::OutsideField {
                node: i,
                x: positions[i].0,
                y: positions[i].1,
            });
        }
        let r2 = comm_radius * comm_radius;
        let n = positions.len();
        let mut neighbors = vec![Vec::new(); n];
        for a in 0..n {
            for b in (a + 1)..n {
                if dist2(positions[a], positions[b]) <= r2 {
                    neighbors[a].push(b);
                    neighbors[b].push(a);
                }
            }
        }
        Ok(Topology {
            positions,
            field,
            comm_radius,
            base_station,
            neighbors,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn comm_radius(&self) -> f64 {
        self.comm_radius
    }

    pub fn base_station(&self) -> usize {
        self.base_station
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        dist2(self.positions[a], self.positions[b]).sqrt()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![self.base_station];
        seen[self.base_station] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.len()
    }

    /// Writes `node_id,x_m,y_m,is_base` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "x_m", "y_m", "is_base"])?;
        for (i, &(x, y)) in self.positions.iter().enumerate() {
            let is_base = if i == self.base_station { "1" } else { "0" };
            w.write_record([i.to_string(), fmt_num(x), fmt_num(y), is_base.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a topology written by [`Topology::write_csv`]. Node ids must be
    /// `0..n` in order and exactly one row must be flagged as the base.
    pub fn read_csv<R: Read>(input: R, field: Field, comm_radius: f64) -> Result<Self, NetworkError> {
        #[derive(Deserialize)]
        struct Row {
            node_id: usize,
            x_m: f64,
            y_m: f64,
            is_base: u8,
        }
        let mut positions = Vec::new();
        let mut base = None;
        for (i, row) in csv::Reader::from_reader(input).deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| NetworkError::TopologyCsv(e.to_string()))?;
            if row.node_id != i {
                return Err(NetworkError::TopologyCsv(format!(
                    "row {} has node_id {}, expected {i}",
                    i + 1,
                    row.node_id
                )));
            }
            if row.is_base != 0 {
                if base.replace(i).is_some() {
                    return Err(NetworkError::TopologyCsv("more than one base station".into()));
                }
            }
            positions.push((row.x_m, row.y_m));
        }
        let base = base.ok_or_else(|| NetworkError::TopologyCsv("no base station row".into()))?;
        Topology::new(positions, field, comm_radius, base)
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

/// Retries `place` until the resulting graph is connected. Node 0 is the
/// base station. Returns the topology and the number of attempts used.
pub fn build_topology_with<F>(
    field: Field,
    comm_radius: f64,
    max_attempts: u32,
    mut place: F,
) -> Result<(Topology, u32), NetworkError>
where
    F: FnMut(u32) -> Vec<(f64, f64)>,
{
    for attempt in 1..=max_attempts {
        let topo = Topology::unchecked(place(attempt), field, comm_radius, 0)?;
        if topo.is_connected() {
            return Ok((topo, attempt));
        }
    }
    Err(NetworkError::DisconnectedAfterRetries {
        attempts: max_attempts,
    })
}

/// Base station at the field center, the other `node_count - 1` nodes
/// uniform over the field.
pub fn build_topology(
    node_count: usize,
    field: Field,
    comm_radius: f64,
    max_attempts: u32,
    stream: &mut RngStream,
) -> Result<(Topology, u32), NetworkError> {
    if node_count < 2 {
        return Err(NetworkError::TooFewNodes(node_count));
    }
    build_topology_with(field, comm_radius, max_attempts, |_| {
        let mut positions = Vec::with_capacity(node_count);
        positions.push(field.center());
        for _ in 1..node_count {
            let x = (1.0 - stream.uniform_open_closed()) * field.width_m;
            let y = (1.0 - stream.uniform_open_closed()) * field.height_m;
            positions.push((x, y));
        }
        positions
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIELD: Field = Field {
        width_m: 100.0,
        height_m: 100.0,
    };

    #[test]
    fn two_close_nodes_are_linked() {
        let (topo, attempts) =
            build_topology_with(FIELD, 10.0, 5, |_| vec![(0.0, 0.0), (5.0, 0.0)]).unwrap();
        assert_eq!(attempts, 1);
        assert_eq!(topo.neighbors(0), &[1]);
    }

    #[test]
    fn far_nodes_exhaust_retries() {
        let err = build_topology_with(FIELD, 10.0, 7, |_| vec![(0.0, 0.0), (50.0, 0.0)]).unwrap_err();
        assert_eq!(err, NetworkError::DisconnectedAfterRetries { attempts: 7 });
    }

    #[test]
    fn rejects_positions_outside_field() {
        let err = Topology::new(vec![(0.0, 0.0), (101.0, 0.0)], FIELD, 200.0, 0).unwrap_err();
        assert!(matches!(err, NetworkError::OutsideField { node: 1, .. }));
    }

    #[test]
    fn default_field_seed_42_connects() {
        let mut s = RngStream::new(42, "topology");
        let (topo, attempts) = build_topology(100, FIELD, 20.0, 1000, &mut s).unwrap();
        assert_eq!(topo.len(), 100);
        assert_eq!(topo.positions()[0], (50.0, 50.0));
        assert!(topo.positions().iter().all(|&p| FIELD.contains(p)));
        // Frozen fixture: attempts needed for seed 42 with the default field.
        assert_eq!(attempts, crate::network::fixtures::SEED_42_TOPOLOGY_ATTEMPTS);
    }

    #[test]
    fn csv_round_trip() {
        let mut s = RngStream::new(7, "topology");
        let (topo, _) = build_topology(30, FIELD, 35.0, 1000, &mut s).unwrap();
        let mut buf = Vec::new();
        topo.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("node_id,x_m,y_m,is_base\n0,50,50,1\n"));
        let back = Topology::read_csv(&buf[..], FIELD, 35.0).unwrap();
        assert_eq!(back.base_station(), 0);
        for (a, b) in back.positions().iter().zip(topo.positions()) {
            assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_requires_single_base() {
        let text = "node_id,x_m,y_m,is_base\n0,0,0,0\n1,5,0,0\n";
        assert!(matches!(
            Topology::read_csv(text.as_bytes(), FIELD, 10.0),
            Err(NetworkError::TopologyCsv(_))
        ));
    }
}
