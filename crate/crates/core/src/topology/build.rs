use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Rational64;
use rand::Rng as _;

use super::{Cell, Direction, Node, NodeId, Point, Topology, TopologyDescriptor, TopologyKind, TopologyMap};
use crate::error::{Error, Result};
use crate::seed;

/// Smallest tree that has a depth-4 node and a pair of first cousins.
const MIN_KINSHIP_TREE: u32 = 7;
const TREE_ATTEMPTS: usize = 100_000;

struct Raw {
    pos: Vec<(Rational64, Rational64)>,
    dirs: Vec<BTreeMap<Direction, NodeId>>,
    depth: Option<Vec<u32>>,
}

impl Raw {
    fn with_nodes(n: usize) -> Self {
        Raw { pos: Vec::with_capacity(n), dirs: vec![BTreeMap::new(); n], depth: None }
    }

    fn link(&mut self, a: NodeId, dir: Direction, b: NodeId) {
        self.dirs[a].insert(dir, b);
        if let Some(back) = dir.opposite() {
            self.dirs[b].insert(back, a);
        }
    }
}

fn int(v: i64) -> Rational64 {
    Rational64::from_integer(v)
}

fn half(v: i64) -> Rational64 {
    Rational64::new(v, 2)
}

pub(super) fn build(desc: &TopologyDescriptor) -> Result<TopologyMap> {
    let raw = match desc.topology {
        Topology::Square { rows, cols } => square(rows, cols, false),
        Topology::Rhombus { rows, cols } => square(rows, cols, true),
        Topology::Hexagon { size } => hexagon(size),
        Topology::Triangle { size } => triangle(size),
        Topology::Ring { n } => ring(n),
        Topology::Tree { nodes } => tree(nodes, desc.seed)?,
    };
    Ok(finish(*desc, raw))
}

fn finish(descriptor: TopologyDescriptor, raw: Raw) -> TopologyMap {
    let kind = descriptor.topology.kind();
    let mut edges = BTreeSet::new();
    for (a, moves) in raw.dirs.iter().enumerate() {
        for &b in moves.values() {
            edges.insert((a.min(b), a.max(b)));
        }
    }

    let rows = match kind {
        TopologyKind::Ring | TopologyKind::Tree => Vec::new(),
        _ => group_rows(&raw.pos),
    };
    let mut cells = vec![None; raw.pos.len()];
    for (r, row) in rows.iter().enumerate() {
        for (c, &id) in row.iter().enumerate() {
            cells[id] = Some(Cell { row: r as u32, col: c as u32 });
        }
    }

    let nodes = raw
        .pos
        .into_iter()
        .enumerate()
        .map(|(id, (x, y))| Node {
            id,
            pos: Point { x, y },
            cell: cells[id],
            depth: raw.depth.as_ref().map(|d| d[id]),
        })
        .collect();

    TopologyMap { descriptor, nodes, edges: edges.into_iter().collect(), directions: raw.dirs, rows }
}

/// Rows top to bottom (decreasing y), each left to right.
fn group_rows(pos: &[(Rational64, Rational64)]) -> Vec<Vec<NodeId>> {
    let mut by_y: BTreeMap<std::cmp::Reverse<Rational64>, Vec<NodeId>> = BTreeMap::new();
    for (id, (_, y)) in pos.iter().enumerate() {
        by_y.entry(std::cmp::Reverse(*y)).or_default().push(id);
    }
    by_y.into_values()
        .map(|mut row| {
            row.sort_by(|&a, &b| pos[a].0.cmp(&pos[b].0));
            row
        })
        .collect()
}

fn square(rows: u32, cols: u32, rotated: bool) -> Raw {
    let (rows, cols) = (rows as usize, cols as usize);
    let mut raw = Raw::with_nodes(rows * cols);
    let label = |d: Direction| if rotated { d.rotate_45() } else { d };
    for r in 0..rows {
        for c in 0..cols {
            raw.pos.push((int(c as i64), int(-(r as i64))));
            let id = r * cols + c;
            if c + 1 < cols {
                raw.link(id, label(Direction::Right), id + 1);
            }
            if r + 1 < rows {
                raw.link(id, label(Direction::Down), id + cols);
            }
        }
    }
    raw
}

fn ring(n: u32) -> Raw {
    let n = n as usize;
    let mut raw = Raw::with_nodes(n);
    for i in 0..n {
        raw.pos.push((int(i as i64), int(0)));
        raw.link(i, Direction::Clockwise, (i + 1) % n);
    }
    raw
}

/// Pointy-top hexagonal cells in axial coordinates with `max(|q|, |r|, |q + r|) < size`.
///
/// Vertex positions are kept in integer half-units: a cell centre sits at
/// `(2q + r, -3r)` and its corners at offsets `(0, ±2)` and `(±1, ±1)`.
/// Consecutive corners differ by `(±1, ±1)` or `(0, ±2)`, which maps onto the
/// six diagonal/vertical labels.
fn hexagon(size: u32) -> Raw {
    const CORNERS: [(i64, i64); 6] = [(0, 2), (1, 1), (1, -1), (0, -2), (-1, -1), (-1, 1)];
    let s = size as i64 - 1;
    let mut corner_set = BTreeSet::new();
    let mut sides = Vec::new();
    for q in -s..=s {
        for r in -s..=s {
            if (q + r).abs() > s {
                continue;
            }
            let (cx, cy) = (2 * q + r, -3 * r);
            let pts: Vec<_> = CORNERS.iter().map(|&(dx, dy)| (cx + dx, cy + dy)).collect();
            for i in 0..6 {
                corner_set.insert(pts[i]);
                sides.push((pts[i], pts[(i + 1) % 6]));
            }
        }
    }
    // Ids ordered top to bottom, then left to right.
    let mut corners: Vec<(i64, i64)> = corner_set.into_iter().collect();
    corners.sort_by_key(|&(x, y)| (-y, x));
    let index: HashMap<(i64, i64), NodeId> = corners.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let mut raw = Raw::with_nodes(corners.len());
    raw.pos = corners.iter().map(|&(x, y)| (half(x), half(y))).collect();
    for (a, b) in sides {
        let dir = match (b.0 - a.0, b.1 - a.1) {
            (0, 2) => Direction::Up,
            (0, -2) => Direction::Down,
            (1, 1) => Direction::UpperRight,
            (-1, 1) => Direction::UpperLeft,
            (1, -1) => Direction::LowerRight,
            (-1, -1) => Direction::LowerLeft,
            d => unreachable!("hexagon side offset {d:?}"),
        };
        raw.link(index[&a], dir, index[&b]);
    }
    raw
}

/// Lattice vertices `(i, j)`, `0 <= j <= i <= size`, row `i` counted from the apex.
fn triangle(size: u32) -> Raw {
    let s = size as usize;
    let id = |i: usize, j: usize| i * (i + 1) / 2 + j;
    let mut raw = Raw::with_nodes((s + 1) * (s + 2) / 2);
    for i in 0..=s {
        for j in 0..=i {
            raw.pos.push((half(2 * j as i64 - i as i64), int(-(i as i64))));
            if j < i {
                raw.link(id(i, j), Direction::Right, id(i, j + 1));
            }
            if i < s {
                raw.link(id(i, j), Direction::LowerLeft, id(i + 1, j));
                raw.link(id(i, j), Direction::LowerRight, id(i + 1, j + 1));
            }
        }
    }
    raw
}

/// Uniform random rooted labeled tree (Prüfer sequence plus uniform root),
/// resampled until it supports cousin, great-great-grandparent and
/// great-great-grandchild questions.
fn tree(n: u32, seed: u64) -> Result<Raw> {
    if n < MIN_KINSHIP_TREE {
        return Err(Error::Generation(format!(
            "a tree needs at least {MIN_KINSHIP_TREE} nodes to have depth 4 and a cousin pair, got {n}"
        )));
    }
    let n = n as usize;
    let mut rng = seed::rng(seed);
    for _ in 0..TREE_ATTEMPTS {
        let prufer: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
        let adj = prufer_decode(&prufer, n);
        let root = rng.random_range(0..n);
        let (order, parent, depth) = bfs_tree(&adj, root);
        if depth.iter().copied().max().unwrap_or(0) < 4 || !has_cousins(&parent, &depth) {
            continue;
        }
        // Relabel in breadth-first order so the root is node 0.
        let mut new_id = vec![0; n];
        for (i, &old) in order.iter().enumerate() {
            new_id[old] = i;
        }
        let mut raw = Raw::with_nodes(n);
        raw.depth = Some(order.iter().map(|&old| depth[old]).collect());
        let mut layer_pos = BTreeMap::<u32, i64>::new();
        for &old in &order {
            let d = depth[old];
            let slot = layer_pos.entry(d).or_insert(0);
            raw.pos.push((int(*slot), int(-(d as i64))));
            *slot += 1;
        }
        for &old in &order {
            let mut kids: Vec<usize> = adj[old].iter().copied().filter(|&c| parent[c] == Some(old)).collect();
            kids.sort_by_key(|&c| new_id[c]);
            for (k, c) in kids.into_iter().enumerate() {
                let (p, c) = (new_id[old], new_id[c]);
                raw.dirs[p].insert(Direction::Child(k as u16 + 1), c);
                raw.dirs[c].insert(Direction::Parent, p);
            }
        }
        return Ok(raw);
    }
    Err(Error::Generation(format!("no {n}-node tree met the kinship constraints")))
}

fn prufer_decode(seq: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut adj = vec![Vec::new(); n];
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    for &v in seq {
        let leaf = leaves.pop_first().expect("a leaf always exists");
        adj[leaf].push(v);
        adj[v].push(leaf);
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.insert(v);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    adj[rest[0]].push(rest[1]);
    adj[rest[1]].push(rest[0]);
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

fn bfs_tree(adj: &[Vec<usize>], root: usize) -> (Vec<usize>, Vec<Option<usize>>, Vec<u32>) {
    let n = adj.len();
    let mut parent = vec![None; n];
    let mut depth = vec![u32::MAX; n];
    let mut order = Vec::with_capacity(n);
    depth[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &adj[u] {
            if depth[v] == u32::MAX {
                depth[v] = depth[u] + 1;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    (order, parent, depth)
}

fn has_cousins(parent: &[Option<usize>], depth: &[u32]) -> bool {
    let grandparent = |v: usize| parent[v].and_then(|p| parent[p]);
    (0..parent.len()).any(|a| {
        (0..parent.len()).any(|b| {
            depth[a] >= 2
                && depth[a] == depth[b]
                && parent[a] != parent[b]
                && grandparent(a).is_some()
                && grandparent(a) == grandparent(b)
        })
    })
}
