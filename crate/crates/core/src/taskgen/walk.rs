use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Setting;
use crate::error::{Error, Result};
use crate::seed;
use crate::topology::{Direction, NodeId, TopologyMap};

const MAX_ATTEMPTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub dir: Direction,
    pub node: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Walk {
    pub start: NodeId,
    pub steps: Vec<Step>,
    pub setting: Setting,
}

impl Walk {
    /// Start followed by every node reached, in order (may repeat).
    pub fn nodes(&self) -> Vec<NodeId> {
        std::iter::once(self.start).chain(self.steps.iter().map(|s| s.node)).collect()
    }

    pub fn end(&self) -> NodeId {
        self.steps.last().map_or(self.start, |s| s.node)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Re-executes the directions on `map` and checks every landing node.
    pub fn replays_on(&self, map: &TopologyMap) -> bool {
        let mut at = self.start;
        for step in &self.steps {
            match map.step(at, step.dir) {
                Some(next) if next == step.node => at = next,
                _ => return false,
            }
        }
        true
    }
}

/// Whether some start admits `steps - 1` self-avoiding moves followed by a
/// non-backtracking move onto an already visited node.
pub fn admits_loop_closure(map: &TopologyMap, steps: u32) -> bool {
    fn extend(map: &TopologyMap, path: &mut Vec<NodeId>, visited: &mut [bool], remaining: u32) -> bool {
        let here = *path.last().expect("non-empty path");
        let moves = map.neighbors(here).expect("node in map");
        if remaining == 0 {
            let prev = path.len().checked_sub(2).map(|i| path[i]);
            return moves.values().any(|&v| visited[v] && Some(v) != prev);
        }
        for &v in moves.values() {
            if !visited[v] {
                visited[v] = true;
                path.push(v);
                let found = extend(map, path, visited, remaining - 1);
                path.pop();
                visited[v] = false;
                if found {
                    return true;
                }
            }
        }
        false
    }

    if steps < 2 || steps as usize > map.node_count() {
        return false;
    }
    let mut visited = vec![false; map.node_count()];
    (0..map.node_count()).any(|start| {
        visited[start] = true;
        let found = extend(map, &mut vec![start], &mut visited, steps - 1);
        visited[start] = false;
        found
    })
}

/// Random walk that visits `steps` distinct nodes and then closes a loop on
/// its final move. Each move is uniform over the valid continuations; a walk
/// that dead-ends is discarded and restarted.
pub fn loop_closure_walk(map: &TopologyMap, steps: u32, seed: u64) -> Result<Walk> {
    if !admits_loop_closure(map, steps) {
        return Err(Error::Generation(format!(
            "{} admits no {steps}-step loop closure",
            map.descriptor().topology.slug()
        )));
    }
    let n = map.node_count();
    let mut rng = seed::rng(seed);
    let mut options: Vec<(Direction, NodeId)> = Vec::new();
    'attempt: for _ in 0..MAX_ATTEMPTS {
        let start = rng.random_range(0..n);
        let mut visited = vec![false; n];
        visited[start] = true;
        let mut walk = Walk { start, steps: Vec::with_capacity(steps as usize), setting: Setting::Local };
        let mut prev = None;
        let mut here = start;
        for i in 0..steps {
            let closing = i + 1 == steps;
            options.clear();
            options.extend(
                map.neighbors(here)?
                    .iter()
                    .filter(|(_, &v)| if closing { visited[v] && Some(v) != prev } else { !visited[v] })
                    .map(|(&d, &v)| (d, v)),
            );
            let Some(&(dir, next)) = options.choose(&mut rng) else {
                continue 'attempt;
            };
            visited[next] = true;
            walk.steps.push(Step { dir, node: next });
            prev = Some(here);
            here = next;
        }
        return Ok(walk);
    }
    Err(Error::Generation(format!("no {steps}-step loop closure after {MAX_ATTEMPTS} attempts")))
}

/// Unconstrained random path: uniform start, each move uniform over the
/// available directions. Revisits are allowed.
pub fn global_path(map: &TopologyMap, steps: u32, seed: u64) -> Result<Walk> {
    if steps == 0 {
        return Err(Error::Generation("a path needs at least one step".into()));
    }
    let mut rng = seed::rng(seed);
    let start = rng.random_range(0..map.node_count());
    let mut walk = Walk { start, steps: Vec::with_capacity(steps as usize), setting: Setting::Global };
    let mut here = start;
    for _ in 0..steps {
        let moves: Vec<(Direction, NodeId)> = map.neighbors(here)?.iter().map(|(&d, &v)| (d, v)).collect();
        let &(dir, next) = moves
            .choose(&mut rng)
            .ok_or_else(|| Error::Generation(format!("node {here} has no neighbours")))?;
        walk.steps.push(Step { dir, node: next });
        here = next;
    }
    Ok(walk)
}

/// Row-by-row sweep of an `height x width` grid from the top-left corner,
/// heading right and reversing direction on every row.
pub fn boustrophedon(map: &TopologyMap, height: u32, width: u32) -> Result<Walk> {
    let mut walk = Walk { start: 0, steps: Vec::new(), setting: Setting::Local };
    let mut here = 0;
    for row in 0..height {
        if row > 0 {
            here = push(map, &mut walk, here, Direction::Down)?;
        }
        let dir = if row % 2 == 0 { Direction::Right } else { Direction::Left };
        for _ in 1..width {
            here = push(map, &mut walk, here, dir)?;
        }
    }
    Ok(walk)
}

fn push(map: &TopologyMap, walk: &mut Walk, here: NodeId, dir: Direction) -> Result<NodeId> {
    let next = map
        .step(here, dir)
        .ok_or_else(|| Error::Generation(format!("cannot move {dir} from node {here}")))?;
    walk.steps.push(Step { dir, node: next });
    Ok(next)
}
