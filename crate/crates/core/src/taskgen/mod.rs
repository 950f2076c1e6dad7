//! Map population and task generation.
//!
//! A [`TaskInstance`] is a pure function of its [`TaskSpec`], the vocabulary
//! and a seed; suites derive one child seed per instance index.

mod kinship;
mod vocab;
mod walk;

use rand::seq::{index, IndexedRandom};
use serde::{Deserialize, Serialize};

pub use kinship::{relatives, Relation};
pub use vocab::Vocabulary;
pub use walk::{admits_loop_closure, boustrophedon, global_path, loop_closure_walk, Step, Walk};

use crate::error::{Error, Result};
use crate::render::{PromptBundle, RenderOptions, Renderer};
use crate::seed::{self, derive_seed};
use crate::topology::{build_topology, NodeId, Topology, TopologyDescriptor, TopologyKind, TopologyMap};

pub const INSTANCE_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Local,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    LoopClosureLocal,
    PathGlobal,
    TreeKinship,
    SizeInference,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::LoopClosureLocal => "loop_closure_local",
            TaskKind::PathGlobal => "path_global",
            TaskKind::TreeKinship => "tree_kinship",
            TaskKind::SizeInference => "size_inference",
        }
    }
}

/// How a global map (or a tree) is verbalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    RowMajor,
    Snake,
    Random,
    SnakeCoord,
    RingClockwise,
    TreeDfs,
    TreeBfs,
}

impl Order {
    pub const ALL: [Order; 7] = [
        Order::RowMajor,
        Order::Snake,
        Order::Random,
        Order::SnakeCoord,
        Order::RingClockwise,
        Order::TreeDfs,
        Order::TreeBfs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Order::RowMajor => "row_major",
            Order::Snake => "snake",
            Order::Random => "random",
            Order::SnakeCoord => "snake_coord",
            Order::RingClockwise => "ring_clockwise",
            Order::TreeDfs => "tree_dfs",
            Order::TreeBfs => "tree_bfs",
        }
    }

    pub fn supports(self, kind: TopologyKind) -> bool {
        use TopologyKind::*;
        match self {
            Order::RowMajor | Order::Random => matches!(kind, Square | Rhombus | Hexagon | Triangle),
            Order::Snake | Order::SnakeCoord => kind == Square,
            Order::RingClockwise => kind == Ring,
            Order::TreeDfs | Order::TreeBfs => kind == Tree,
        }
    }

    /// Orders usable for a global path on `kind`.
    pub fn for_topology(kind: TopologyKind) -> Vec<Order> {
        Order::ALL.into_iter().filter(|o| o.supports(kind)).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMode {
    /// Compared as an unordered set.
    #[default]
    Set,
    /// Compared element by element (height, width).
    Ordered,
}

/// A map with an object label at every node.
#[derive(Clone, Debug)]
pub struct World {
    pub map: TopologyMap,
    /// Label per node id; empty for unlabeled maps (direction-only size inference).
    pub labels: Vec<String>,
    pub seed: u64,
}

impl World {
    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node]
    }

    pub fn node_of(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn spec(&self) -> WorldSpec {
        WorldSpec { topology: *self.map.descriptor(), labels: self.labels.clone() }
    }
}

/// Serialized form of a [`World`]; the map is rebuilt from the descriptor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub topology: TopologyDescriptor,
    pub labels: Vec<String>,
}

impl WorldSpec {
    pub fn build(&self) -> Result<World> {
        let map = build_topology(&self.topology)?;
        if !self.labels.is_empty() && self.labels.len() != map.node_count() {
            return Err(Error::Generation(format!(
                "{} labels for {} nodes",
                self.labels.len(),
                map.node_count()
            )));
        }
        Ok(World { map, labels: self.labels.clone(), seed: self.topology.seed })
    }
}

/// Assigns distinct random labels to every node.
pub fn populate(map: TopologyMap, vocab: &Vocabulary, seed: u64) -> Result<World> {
    let n = map.node_count();
    if vocab.len() < n {
        return Err(Error::Vocabulary(format!("{} labels cannot fill {n} locations", vocab.len())));
    }
    let mut rng = seed::rng(seed);
    let labels = index::sample(&mut rng, vocab.len(), n)
        .into_iter()
        .map(|i| vocab.labels()[i].clone())
        .collect();
    Ok(World { map, labels, seed })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Derivation {
    Walk(Walk),
    Kinship { anchor: NodeId, relation: Relation },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    /// Navigation steps (moves) in the prompt; relation length for trees.
    pub steps: u32,
    pub seed: u64,
    pub num_nodes: u32,
    pub num_edges: u32,
    pub with_items: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub schema: u32,
    pub id: String,
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Order>,
    pub world: WorldSpec,
    pub derivation: Derivation,
    pub ground_truth: Vec<String>,
    #[serde(default)]
    pub answer_mode: AnswerMode,
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<PromptBundle>,
}

impl TaskInstance {
    pub fn world(&self) -> Result<World> {
        self.world.build()
    }

    pub fn walk(&self) -> Option<&Walk> {
        match &self.derivation {
            Derivation::Walk(w) => Some(w),
            Derivation::Kinship { .. } => None,
        }
    }

    pub fn topology(&self) -> Topology {
        self.world.topology.topology
    }

    pub fn setting(&self) -> Setting {
        match self.kind {
            TaskKind::LoopClosureLocal | TaskKind::SizeInference => Setting::Local,
            TaskKind::PathGlobal | TaskKind::TreeKinship => Setting::Global,
        }
    }

    /// Objects in the order the prompt mentions them, repeats included.
    ///
    /// Computed from the instance structure alone; the renderer produces the
    /// same sequence from its text.
    pub fn mention_sequence(&self) -> Result<Vec<String>> {
        let world = self.world()?;
        let label = |n: NodeId| world.labels[n].clone();
        Ok(match (&self.derivation, self.kind) {
            (Derivation::Walk(walk), TaskKind::LoopClosureLocal) => {
                let nodes = walk.nodes();
                nodes[..nodes.len() - 1].iter().map(|&n| label(n)).collect()
            }
            (Derivation::Walk(walk), TaskKind::SizeInference) => {
                if world.labels.is_empty() {
                    Vec::new()
                } else {
                    walk.nodes().into_iter().map(label).collect()
                }
            }
            (Derivation::Walk(walk), TaskKind::PathGlobal) => {
                let order = self.order.ok_or_else(|| Error::Render("global instance without order".into()))?;
                let mut seq: Vec<String> = map_listing(&world.map, order, self.metadata.seed)?
                    .into_iter()
                    .map(label)
                    .collect();
                seq.push(label(walk.start));
                seq
            }
            (Derivation::Kinship { anchor, .. }, _) => {
                let order = self.order.unwrap_or(Order::TreeDfs);
                let mut seq: Vec<String> = parent_child_pairs(&world.map, order)
                    .into_iter()
                    .flat_map(|(p, c)| [label(p), label(c)])
                    .collect();
                seq.push(label(*anchor));
                seq
            }
            (Derivation::Walk(_), TaskKind::TreeKinship) => {
                return Err(Error::Render("tree instance with a walk derivation".into()))
            }
        })
    }
}

/// Node order of a global map listing.
pub fn map_listing(map: &TopologyMap, order: Order, instance_seed: u64) -> Result<Vec<NodeId>> {
    if !order.supports(map.kind()) {
        return Err(Error::Render(format!("order {} does not apply to {}", order.name(), map.kind().name())));
    }
    Ok(match order {
        Order::RowMajor => map.rows().concat(),
        Order::Snake | Order::SnakeCoord => map
            .rows()
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                let mut row = row.clone();
                if r % 2 == 1 {
                    row.reverse();
                }
                row
            })
            .collect(),
        Order::Random => random_layout(map, instance_seed),
        Order::RingClockwise => (0..map.node_count()).collect(),
        Order::TreeDfs | Order::TreeBfs => {
            let pairs = parent_child_pairs(map, order);
            std::iter::once(0).chain(pairs.into_iter().map(|(_, c)| c)).collect()
        }
    })
}

/// Shuffled node order for the random-coordinates listing.
pub fn random_layout(map: &TopologyMap, instance_seed: u64) -> Vec<NodeId> {
    use rand::seq::SliceRandom;
    let mut nodes: Vec<NodeId> = map.rows().concat();
    nodes.shuffle(&mut seed::rng(derive_seed(instance_seed, "random-order", 0)));
    nodes
}

/// Parent/child edges in depth-first (pre-order) or breadth-first order.
pub fn parent_child_pairs(map: &TopologyMap, order: Order) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::with_capacity(map.node_count().saturating_sub(1));
    if map.node_count() == 0 {
        return out;
    }
    if order == Order::TreeBfs {
        let mut queue = std::collections::VecDeque::from([0]);
        while let Some(p) = queue.pop_front() {
            for c in map.children(p) {
                out.push((p, c));
                queue.push_back(c);
            }
        }
    } else {
        fn visit(map: &TopologyMap, p: NodeId, out: &mut Vec<(NodeId, NodeId)>) {
            for c in map.children(p) {
                out.push((p, c));
                visit(map, c, out);
            }
        }
        visit(map, 0, &mut out);
    }
    out
}

/// What to generate. One spec describes a whole family of instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskSpec {
    LoopClosure { topology: Topology, steps: u32 },
    GlobalPath { topology: Topology, steps: u32, order: Order },
    TreeKinship { nodes: u32, relation: Relation, order: Order },
    SizeInference { height: u32, width: u32, with_items: bool },
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match *self {
            TaskSpec::LoopClosure { topology, steps } => {
                topology.validate()?;
                if topology.kind() == TopologyKind::Tree {
                    return bad("trees have no loops; use a kinship task".into());
                }
                if steps < 2 {
                    return bad(format!("loop closure needs at least 2 steps, got {steps}"));
                }
            }
            TaskSpec::GlobalPath { topology, steps, order } => {
                topology.validate()?;
                if topology.kind() == TopologyKind::Tree {
                    return bad("trees are posed as kinship questions, not paths".into());
                }
                if steps == 0 {
                    return bad("a path needs at least one step".into());
                }
                if !order.supports(topology.kind()) {
                    return bad(format!("order {} does not apply to {}", order.name(), topology.kind().name()));
                }
            }
            TaskSpec::TreeKinship { nodes, order, .. } => {
                Topology::Tree { nodes }.validate()?;
                if !order.supports(TopologyKind::Tree) {
                    return bad(format!("order {} does not apply to trees", order.name()));
                }
            }
            TaskSpec::SizeInference { height, width, .. } => {
                if height < 2 || width < 2 {
                    return bad(format!("rectangle must be at least 2x2, got {height}x{width}"));
                }
            }
        }
        Ok(())
    }

    pub fn slug(&self) -> String {
        match *self {
            TaskSpec::LoopClosure { topology, steps } => format!("{}-local-k{steps}", topology.slug()),
            TaskSpec::GlobalPath { topology, steps, order } => {
                format!("{}-global-{}-k{steps}", topology.slug(), order.name())
            }
            TaskSpec::TreeKinship { nodes, relation, order } => {
                format!("tree{nodes}-{}-{}", relation.name(), order.name())
            }
            TaskSpec::SizeInference { height, width, with_items } => {
                format!("size{height}x{width}-{}", if with_items { "items" } else { "directions" })
            }
        }
    }
}

fn metadata(world: &World, steps: u32, seed: u64, with_items: bool) -> Metadata {
    Metadata {
        steps,
        seed,
        num_nodes: world.map.node_count() as u32,
        num_edges: world.map.edge_count() as u32,
        with_items,
    }
}

/// Generates one unrendered instance.
pub fn generate_instance(spec: &TaskSpec, vocab: &Vocabulary, seed: u64, id: String) -> Result<TaskInstance> {
    spec.validate()?;
    let child = |stage: &str| derive_seed(seed, stage, 0);
    match *spec {
        TaskSpec::LoopClosure { topology, steps } => {
            let world = populate(topology.build(child("topology"))?, vocab, child("populate"))?;
            let walk = loop_closure_walk(&world.map, steps, child("walk"))?;
            let truth = world.label(walk.end()).to_string();
            Ok(TaskInstance {
                schema: INSTANCE_SCHEMA,
                id,
                kind: TaskKind::LoopClosureLocal,
                order: None,
                metadata: metadata(&world, steps, seed, true),
                world: world.spec(),
                derivation: Derivation::Walk(walk),
                ground_truth: vec![truth],
                answer_mode: AnswerMode::Set,
                prompt: None,
            })
        }
        TaskSpec::GlobalPath { topology, steps, order } => {
            let world = populate(topology.build(child("topology"))?, vocab, child("populate"))?;
            let walk = global_path(&world.map, steps, child("walk"))?;
            let truth = world.label(walk.end()).to_string();
            Ok(TaskInstance {
                schema: INSTANCE_SCHEMA,
                id,
                kind: TaskKind::PathGlobal,
                order: Some(order),
                metadata: metadata(&world, steps, seed, true),
                world: world.spec(),
                derivation: Derivation::Walk(walk),
                ground_truth: vec![truth],
                answer_mode: AnswerMode::Set,
                prompt: None,
            })
        }
        TaskSpec::TreeKinship { nodes, relation, order } => {
            let world = populate(Topology::Tree { nodes }.build(child("topology"))?, vocab, child("populate"))?;
            tree_question(&world, relation, order, seed, id)
        }
        TaskSpec::SizeInference { height, width, with_items } => {
            size_inference(height, width, with_items, vocab, seed, id)
        }
    }
}

/// Kinship question about a uniformly chosen eligible anchor.
pub fn tree_question(world: &World, relation: Relation, order: Order, seed: u64, id: String) -> Result<TaskInstance> {
    let map = &world.map;
    if map.kind() != TopologyKind::Tree {
        return Err(Error::Generation("kinship questions need a tree".into()));
    }
    let eligible: Vec<NodeId> =
        (0..map.node_count()).filter(|&n| !relatives(map, n, relation).is_empty()).collect();
    let &anchor = eligible
        .choose(&mut seed::rng(derive_seed(seed, "question", 0)))
        .ok_or_else(|| Error::Generation(format!("no node has a {}", relation.name())))?;
    let truth = relatives(map, anchor, relation).into_iter().map(|n| world.label(n).to_string()).collect();
    Ok(TaskInstance {
        schema: INSTANCE_SCHEMA,
        id,
        kind: TaskKind::TreeKinship,
        order: Some(order),
        metadata: metadata(world, 4, seed, true),
        world: world.spec(),
        derivation: Derivation::Kinship { anchor, relation },
        ground_truth: truth,
        answer_mode: AnswerMode::Set,
        prompt: None,
    })
}

/// Full sweep of an `height x width` rectangle; the answer is `(height, width)`.
pub fn size_inference(
    height: u32,
    width: u32,
    with_items: bool,
    vocab: &Vocabulary,
    seed: u64,
    id: String,
) -> Result<TaskInstance> {
    TaskSpec::SizeInference { height, width, with_items }.validate()?;
    let map = Topology::Square { rows: height, cols: width }.build(0)?;
    let world = if with_items {
        populate(map, vocab, derive_seed(seed, "populate", 0))?
    } else {
        World { map, labels: Vec::new(), seed }
    };
    let walk = boustrophedon(&world.map, height, width)?;
    Ok(TaskInstance {
        schema: INSTANCE_SCHEMA,
        id,
        kind: TaskKind::SizeInference,
        order: None,
        metadata: metadata(&world, walk.len() as u32, seed, with_items),
        world: world.spec(),
        derivation: Derivation::Walk(walk),
        ground_truth: vec![height.to_string(), width.to_string()],
        answer_mode: AnswerMode::Ordered,
        prompt: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub task: TaskSpec,
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub render: RenderOptions,
}

/// Generates and renders `count` instances. Instance `i` uses seed
/// `derive_seed(seed, "instance", i)`; chain-of-thought shots come from the
/// separate `"shot"` stage so they never coincide with a target.
pub fn generate_suite(suite: &SuiteSpec, vocab: &Vocabulary) -> Result<Vec<TaskInstance>> {
    generate_suite_with(suite, vocab, &Renderer::default())
}

pub fn generate_suite_with(suite: &SuiteSpec, vocab: &Vocabulary, renderer: &Renderer) -> Result<Vec<TaskInstance>> {
    suite.task.validate()?;
    let slug = suite.task.slug();
    (0..suite.count)
        .map(|i| {
            let seed = derive_seed(suite.seed, "instance", i as u64);
            let mut inst = generate_instance(&suite.task, vocab, seed, format!("{slug}-{i:05}"))?;
            let shots = shot_pool(&suite.task, vocab, seed, &inst, suite.render.cot_shots)?;
            inst.prompt = Some(renderer.render_with_shots(&inst, &suite.render, &shots)?);
            Ok(inst)
        })
        .collect()
}

fn shot_pool(
    task: &TaskSpec,
    vocab: &Vocabulary,
    seed: u64,
    target: &TaskInstance,
    n: u32,
) -> Result<Vec<TaskInstance>> {
    const MAX_DRAWS: u64 = 1_000;
    let mut shots = Vec::with_capacity(n as usize);
    let mut j = 0u64;
    while shots.len() < n as usize {
        if j == MAX_DRAWS {
            return Err(Error::Render(format!(
                "only {} of {n} worked examples differ from {}",
                shots.len(),
                target.id
            )));
        }
        let shot = generate_instance(task, vocab, derive_seed(seed, "shot", j), format!("{}-shot{j}", target.id))?;
        j += 1;
        if shot.world != target.world || shot.derivation != target.derivation {
            shots.push(shot);
        }
    }
    Ok(shots)
}
