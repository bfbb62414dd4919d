//! Seeded sensor deployments over a square field with a Boolean disk radio
//! model, plus the BFS hop-distance oracle used to check level building.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{SimRng, Stream};

/// Communication radius shared by every built-in scenario, in meters.
pub const DEFAULT_COMM_RADIUS: f64 = 110.0;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u16);

impl NodeId {
    /// The sink always takes id 0.
    pub const SINK: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_sink(self) -> bool {
        self == Self::SINK
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkPlacement {
    #[default]
    Center,
    Explicit {
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("node_count must be at least 1")]
    NoNodes,
    #[error("node_count {0} does not fit 16-bit node ids")]
    TooManyNodes(usize),
    #[error("side_length must be positive and finite, got {0}")]
    BadSide(f64),
    #[error("comm_radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("sink position ({x}, {y}) lies outside the deployment square")]
    SinkOutside { x: f64, y: f64 },
    #[error("edge ({0}, {1}) references a node outside the topology or is a self-loop")]
    BadEdge(u16, u16),
}

/// One deployment. `node_count` includes the sink, which is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub node_count: usize,
    pub side_length: f64,
    #[serde(default = "default_radius")]
    pub comm_radius: f64,
    #[serde(default)]
    pub sink_placement: SinkPlacement,
    #[serde(default)]
    pub topology_seed: u64,
}

fn default_radius() -> f64 {
    DEFAULT_COMM_RADIUS
}

impl ScenarioConfig {
    pub fn new(node_count: usize, side_length: f64) -> Self {
        ScenarioConfig {
            node_count,
            side_length,
            comm_radius: DEFAULT_COMM_RADIUS,
            sink_placement: SinkPlacement::Center,
            topology_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.topology_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.node_count == 0 {
            return Err(TopologyError::NoNodes);
        }
        if self.node_count > u16::MAX as usize + 1 {
            return Err(TopologyError::TooManyNodes(self.node_count));
        }
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return Err(TopologyError::BadSide(self.side_length));
        }
        if !(self.comm_radius.is_finite() && self.comm_radius > 0.0) {
            return Err(TopologyError::BadRadius(self.comm_radius));
        }
        if let SinkPlacement::Explicit { x, y } = self.sink_placement {
            let inside = |v: f64| (0.0..=self.side_length).contains(&v);
            if !(inside(x) && inside(y)) {
                return Err(TopologyError::SinkOutside { x, y });
            }
        }
        Ok(())
    }

    fn sink_position(&self) -> Position {
        match self.sink_placement {
            SinkPlacement::Center => Position {
                x: self.side_length / 2.0,
                y: self.side_length / 2.0,
            },
            SinkPlacement::Explicit { x, y } => Position { x, y },
        }
    }
}

/// The five built-in scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::S1, Preset::S2, Preset::S3, Preset::S4, Preset::S5];

    pub fn from_name(name: &str) -> Option<Preset> {
        match name.to_ascii_lowercase().as_str() {
            "s1" => Some(Preset::S1),
            "s2" => Some(Preset::S2),
            "s3" => Some(Preset::S3),
            "s4" => Some(Preset::S4),
            "s5" => Some(Preset::S5),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::S1 => "s1",
            Preset::S2 => "s2",
            Preset::S3 => "s3",
            Preset::S4 => "s4",
            Preset::S5 => "s5",
        }
    }

    /// `(node_count, side_length)`.
    pub fn dimensions(self) -> (usize, f64) {
        match self {
            Preset::S1 => (50, 250.0),
            Preset::S2 => (125, 500.0),
            Preset::S3 => (250, 1000.0),
            Preset::S4 => (1000, 2000.0),
            Preset::S5 => (4000, 4000.0),
        }
    }

    /// Suppression threshold used for this scenario in comparison runs.
    pub fn default_threshold(self) -> f64 {
        match self {
            Preset::S1 | Preset::S2 => 0.4,
            Preset::S3 => 0.5,
            Preset::S4 | Preset::S5 => 0.8,
        }
    }

    /// s4 and s5 are slow enough that batch drivers gate them.
    pub fn is_large(self) -> bool {
        matches!(self, Preset::S4 | Preset::S5)
    }

    pub fn config(self, topology_seed: u64) -> ScenarioConfig {
        let (n, side) = self.dimensions();
        ScenarioConfig::new(n, side).with_seed(topology_seed)
    }
}

/// Immutable deployment: positions, sink, and sorted adjacency lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    positions: Vec<Position>,
    sink: NodeId,
    comm_radius: Option<f64>,
    adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Uniform i.i.d. placement of `node_count - 1` sensors; the sink is node 0.
    pub fn generate(cfg: &ScenarioConfig) -> Result<Topology, TopologyError> {
        cfg.validate()?;
        let mut rng = SimRng::new(cfg.topology_seed, Stream::Topology);
        let mut positions = Vec::with_capacity(cfg.node_count);
        positions.push(cfg.sink_position());
        for _ in 1..cfg.node_count {
            let x = rng.unit() * cfg.side_length;
            let y = rng.unit() * cfg.side_length;
            positions.push(Position { x, y });
        }
        Ok(Self::from_positions(
            positions,
            NodeId::SINK,
            cfg.comm_radius,
        ))
    }

    /// Disk graph over explicit coordinates.
    pub fn from_positions(positions: Vec<Position>, sink: NodeId, comm_radius: f64) -> Topology {
        let adjacency = disk_adjacency(&positions, comm_radius);
        Topology {
            positions,
            sink,
            comm_radius: Some(comm_radius),
            adjacency,
        }
    }

    /// Logical topology with no geometry, for hand-built fixtures.
    pub fn from_edges(
        node_count: usize,
        sink: NodeId,
        edges: &[(u16, u16)],
    ) -> Result<Topology, TopologyError> {
        if node_count == 0 {
            return Err(TopologyError::NoNodes);
        }
        if node_count > u16::MAX as usize + 1 {
            return Err(TopologyError::TooManyNodes(node_count));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a == b || a as usize >= node_count || b as usize >= node_count {
                return Err(TopologyError::BadEdge(a, b));
            }
            adjacency[a as usize].push(NodeId(b));
            adjacency[b as usize].push(NodeId(a));
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Topology {
            positions: Vec::new(),
            sink,
            comm_radius: None,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(|i| NodeId(i as u16))
    }

    /// Empty for topologies built with [`Topology::from_edges`].
    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn comm_radius(&self) -> Option<f64> {
        self.comm_radius
    }

    #[inline]
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id.index()]
    }

    #[inline]
    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency[id.index()].len()
    }

    #[inline]
    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn average_degree(&self) -> f64 {
        if self.adjacency.is_empty() {
            return 0.0;
        }
        (2 * self.edge_count()) as f64 / self.node_count() as f64
    }

    /// BFS hop count from the sink; `None` marks nodes outside the sink's
    /// component.
    pub fn hop_distance_oracle(&self) -> Vec<Option<u32>> {
        let mut hops = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        hops[self.sink.index()] = Some(0);
        queue.push_back(self.sink);
        while let Some(u) = queue.pop_front() {
            let next = hops[u.index()].map(|h| h + 1);
            for &v in self.neighbors(u) {
                if hops[v.index()].is_none() {
                    hops[v.index()] = next;
                    queue.push_back(v);
                }
            }
        }
        hops
    }

    pub fn is_connected(&self) -> bool {
        self.hop_distance_oracle().iter().all(Option::is_some)
    }
}

/// Grid-bucketed disk adjacency; cells are `radius` wide so only the 3x3
/// neighbourhood of a cell can hold neighbours.
fn disk_adjacency(positions: &[Position], radius: f64) -> Vec<Vec<NodeId>> {
    let n = positions.len();
    let mut adjacency = vec![Vec::new(); n];
    if n == 0 {
        return adjacency;
    }
    let r2 = radius * radius;
    let min_x = positions.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let min_y = positions.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let cell_of = |p: &Position| {
        (
            ((p.x - min_x) / radius).floor() as i64,
            ((p.y - min_y) / radius).floor() as i64,
        )
    };
    let mut cells: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
    for (i, p) in positions.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }
    for (i, p) in positions.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = cells.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &j in bucket {
                    if j != i && p.distance_sq(&positions[j]) <= r2 {
                        adjacency[i].push(NodeId(j as u16));
                    }
                }
            }
        }
        adjacency[i].sort_unstable();
    }
    adjacency
}
