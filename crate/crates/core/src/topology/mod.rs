//! Graph structures the navigation tasks are posed on.
//!
//! Every topology is a small finite graph whose edges carry direction labels:
//! square and rhombus grids, the vertex graph of a hexagon-of-hexagons patch,
//! a subdivided triangle, a ring, and random rooted trees.

mod build;
mod direction;

use std::collections::{BTreeMap, VecDeque};

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

pub use direction::Direction;

use crate::error::{Error, Result};

pub type NodeId = usize;

pub const DESCRIPTOR_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Square,
    Rhombus,
    Hexagon,
    Triangle,
    Ring,
    Tree,
}

impl TopologyKind {
    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Square => "square",
            TopologyKind::Rhombus => "rhombus",
            TopologyKind::Hexagon => "hexagon",
            TopologyKind::Triangle => "triangle",
            TopologyKind::Ring => "ring",
            TopologyKind::Tree => "tree",
        }
    }
}

/// Shape and size of a map. Serialized as `{"kind": ..., "params": {...}}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Topology {
    Square { rows: u32, cols: u32 },
    /// Square adjacency with every label rotated 45 degrees.
    Rhombus { rows: u32, cols: u32 },
    /// Vertex graph of a hexagon made of hexagonal cells, `size` cells per side.
    Hexagon { size: u32 },
    /// Equilateral triangle of side `size` cut into unit triangles.
    Triangle { size: u32 },
    Ring { n: u32 },
    Tree { nodes: u32 },
}

impl Topology {
    pub fn kind(&self) -> TopologyKind {
        match self {
            Topology::Square { .. } => TopologyKind::Square,
            Topology::Rhombus { .. } => TopologyKind::Rhombus,
            Topology::Hexagon { .. } => TopologyKind::Hexagon,
            Topology::Triangle { .. } => TopologyKind::Triangle,
            Topology::Ring { .. } => TopologyKind::Ring,
            Topology::Tree { .. } => TopologyKind::Tree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Descriptor(msg));
        match *self {
            Topology::Square { rows, cols } | Topology::Rhombus { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return bad(format!("grid dimensions must be positive, got {rows}x{cols}"));
                }
            }
            Topology::Hexagon { size } | Topology::Triangle { size } => {
                if size == 0 {
                    return bad("size must be at least 1".into());
                }
            }
            Topology::Ring { n } => {
                if n < 3 {
                    return bad(format!("ring needs at least 3 nodes, got {n}"));
                }
            }
            Topology::Tree { nodes } => {
                if nodes < 2 {
                    return bad(format!("tree needs at least 2 nodes, got {nodes}"));
                }
            }
        }
        Ok(())
    }

    /// Short identifier such as `square3x3` or `hexagon2`.
    pub fn slug(&self) -> String {
        match *self {
            Topology::Square { rows, cols } => format!("square{rows}x{cols}"),
            Topology::Rhombus { rows, cols } => format!("rhombus{rows}x{cols}"),
            Topology::Hexagon { size } => format!("hexagon{size}"),
            Topology::Triangle { size } => format!("triangle{size}"),
            Topology::Ring { n } => format!("ring{n}"),
            Topology::Tree { nodes } => format!("tree{nodes}"),
        }
    }

    pub fn build(self, seed: u64) -> Result<TopologyMap> {
        build_topology(&TopologyDescriptor::new(self, seed))
    }
}

/// Versioned, serializable description of a map: `{"version", "kind", "params", "seed"}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopologyDescriptor {
    pub version: u32,
    #[serde(flatten)]
    pub topology: Topology,
    /// Only trees consume the seed; grids and rings are fully determined by their size.
    pub seed: u64,
}

impl TopologyDescriptor {
    pub fn new(topology: Topology, seed: u64) -> Self {
        TopologyDescriptor { version: DESCRIPTOR_VERSION, topology, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub x: Rational64,
    pub y: Rational64,
}

/// Zero-based row and column within a row-structured map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub pos: Point,
    /// Row/column for grid-like maps (rows run top to bottom, columns left to right).
    pub cell: Option<Cell>,
    /// Distance from the root, trees only.
    pub depth: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct TopologyMap {
    descriptor: TopologyDescriptor,
    nodes: Vec<Node>,
    edges: Vec<(NodeId, NodeId)>,
    directions: Vec<BTreeMap<Direction, NodeId>>,
    rows: Vec<Vec<NodeId>>,
}

pub fn build_topology(desc: &TopologyDescriptor) -> Result<TopologyMap> {
    desc.topology.validate()?;
    build::build(desc)
}

impl TopologyMap {
    pub fn descriptor(&self) -> &TopologyDescriptor {
        &self.descriptor
    }

    pub fn kind(&self) -> TopologyKind {
        self.descriptor.topology.kind()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Labeled outgoing moves from `a`.
    pub fn neighbors(&self, a: NodeId) -> Result<&BTreeMap<Direction, NodeId>> {
        self.directions.get(a).ok_or(Error::UnknownNode(a))
    }

    pub fn step(&self, a: NodeId, dir: Direction) -> Option<NodeId> {
        self.directions.get(a).and_then(|m| m.get(&dir).copied())
    }

    pub fn degree(&self, a: NodeId) -> usize {
        self.directions.get(a).map_or(0, BTreeMap::len)
    }

    /// Nodes grouped into rows, top to bottom, each row left to right.
    /// Empty for rings and trees.
    pub fn rows(&self) -> &[Vec<NodeId>] {
        &self.rows
    }

    /// Breadth-first distances from `a` to every node (`u32::MAX` if unreachable).
    pub fn distances_from(&self, a: NodeId) -> Result<Vec<u32>> {
        self.node(a)?;
        let mut dist = vec![u32::MAX; self.nodes.len()];
        let mut queue = VecDeque::from([a]);
        dist[a] = 0;
        while let Some(u) = queue.pop_front() {
            for &v in self.directions[u].values() {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    pub fn shortest_distance(&self, a: NodeId, b: NodeId) -> Result<u32> {
        self.node(b)?;
        Ok(self.distances_from(a)?[b])
    }

    pub fn distance_matrix(&self) -> Vec<Vec<u32>> {
        (0..self.nodes.len())
            .map(|a| self.distances_from(a).expect("node in range"))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.nodes.is_empty()
            || self.distances_from(0).expect("node 0").iter().all(|&d| d != u32::MAX)
    }

    /// Length of the shortest cycle, `None` for acyclic maps.
    pub fn girth(&self) -> Option<u32> {
        let mut best: Option<u32> = None;
        for root in 0..self.nodes.len() {
            let mut dist = vec![u32::MAX; self.nodes.len()];
            let mut parent = vec![usize::MAX; self.nodes.len()];
            dist[root] = 0;
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                for &v in self.directions[u].values() {
                    if dist[v] == u32::MAX {
                        dist[v] = dist[u] + 1;
                        parent[v] = u;
                        queue.push_back(v);
                    } else if parent[u] != v {
                        let len = dist[u] + dist[v] + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                }
            }
        }
        best
    }

    pub fn parent(&self, a: NodeId) -> Option<NodeId> {
        self.step(a, Direction::Parent)
    }

    pub fn children(&self, a: NodeId) -> Vec<NodeId> {
        self.directions.get(a).map_or_else(Vec::new, |m| {
            m.iter()
                .filter(|(d, _)| matches!(d, Direction::Child(_)))
                .map(|(_, &v)| v)
                .collect()
        })
    }

    pub fn depth(&self, a: NodeId) -> Option<u32> {
        self.nodes.get(a).and_then(|n| n.depth)
    }

    /// Checks that every labeled move has the matching reverse move.
    pub fn is_inverse_consistent(&self) -> bool {
        self.directions.iter().enumerate().all(|(a, moves)| {
            moves.iter().all(|(&dir, &b)| match dir.opposite() {
                Some(back) => self.step(b, back) == Some(a),
                // Parent edges: `a` must appear among the parent's children.
                None => self.directions[b]
                    .iter()
                    .any(|(d, &c)| matches!(d, Direction::Child(_)) && c == a),
            })
        })
    }
}
