use serde::{Deserialize, Serialize};

use crate::topology::{NodeId, TopologyMap};

/// Four-edge family relations asked about on trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Shares a grandparent but not a parent.
    Cousin,
    GreatGreatGrandparent,
    GreatGreatGrandchildren,
}

impl Relation {
    pub const ALL: [Relation; 3] =
        [Relation::Cousin, Relation::GreatGreatGrandparent, Relation::GreatGreatGrandchildren];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Cousin => "cousin",
            Relation::GreatGreatGrandparent => "great_great_grandparent",
            Relation::GreatGreatGrandchildren => "great_great_grandchildren",
        }
    }
}

fn ancestor(map: &TopologyMap, mut node: NodeId, generations: u32) -> Option<NodeId> {
    for _ in 0..generations {
        node = map.parent(node)?;
    }
    Some(node)
}

fn descendants(map: &TopologyMap, node: NodeId, generations: u32) -> Vec<NodeId> {
    let mut layer = vec![node];
    for _ in 0..generations {
        layer = layer.iter().flat_map(|&n| map.children(n)).collect();
    }
    layer
}

/// Relatives of `node`, sorted by node id.
pub fn relatives(map: &TopologyMap, node: NodeId, relation: Relation) -> Vec<NodeId> {
    let mut out = match relation {
        Relation::GreatGreatGrandparent => ancestor(map, node, 4).into_iter().collect(),
        Relation::GreatGreatGrandchildren => descendants(map, node, 4),
        Relation::Cousin => match (map.parent(node), ancestor(map, node, 2)) {
            (Some(parent), Some(grand)) => map
                .children(grand)
                .into_iter()
                .filter(|&uncle| uncle != parent)
                .flat_map(|uncle| map.children(uncle))
                .collect(),
            _ => Vec::new(),
        },
    };
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    #[test]
    fn relations_are_consistent() {
        for seed in 0..30 {
            let map = Topology::Tree { nodes: 9 }.build(seed).unwrap();
            for a in 0..map.node_count() {
                for &g in &relatives(&map, a, Relation::GreatGreatGrandparent) {
                    assert!(relatives(&map, g, Relation::GreatGreatGrandchildren).contains(&a));
                }
                for &c in &relatives(&map, a, Relation::Cousin) {
                    assert!(relatives(&map, c, Relation::Cousin).contains(&a));
                    assert_eq!(map.shortest_distance(a, c).unwrap(), 4);
                }
            }
        }
    }
}
