//! Natural-language prompts for task instances, and the parser that reads
//! them back.

mod parse;
mod templates;

use serde::{Deserialize, Serialize};

pub use parse::{ListedObject, ParsedMove, ParsedPrompt, ParsedQuestion};
pub use templates::{fill, Templates};

use crate::error::{Error, Result};
use crate::taskgen::{
    map_listing, parent_child_pairs, relatives, Derivation, Order, Relation, TaskInstance, TaskKind, Walk, World,
};
use crate::topology::{Direction, NodeId, TopologyKind, TopologyMap};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Prepend the structural description for hexagon and triangle maps.
    #[serde(default)]
    pub detailed: bool,
    /// Number of worked chain-of-thought examples; 0 renders zero-shot.
    #[serde(default)]
    pub cot_shots: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub detailed_description: bool,
    pub coord_annotation: bool,
    pub cot_shots: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub question: String,
    pub explanation: String,
    pub answer: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub user_prompt: String,
    /// The target question on its own (equal to `user_prompt` when zero-shot).
    pub question: String,
    #[serde(default)]
    pub shots: Vec<Shot>,
    pub variant: Variant,
}

pub fn article(label: &str) -> &'static str {
    match label.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

pub fn with_article(label: &str) -> String {
    format!("{} {label}", article(label))
}

/// Inverse of [`with_article`].
pub fn strip_article(text: &str) -> Option<&str> {
    for art in ["an", "a"] {
        if let Some(rest) = text.strip_prefix(art).and_then(|r| r.strip_prefix(' ')) {
            if !rest.is_empty() && article(rest) == art {
                return Some(rest);
            }
        }
    }
    None
}

/// "x", "x and y", "x, y, and z".
pub fn join_list<S: AsRef<str>>(items: &[S]) -> String {
    match items {
        [] => String::new(),
        [one] => one.as_ref().to_string(),
        [a, b] => format!("{} and {}", a.as_ref(), b.as_ref()),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{}, and {}", head.join(", "), last.as_ref())
        }
    }
}

const ORDINALS: [&str; 20] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth", "eleventh",
    "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth", "seventeenth", "eighteenth", "nineteenth",
    "twentieth",
];

/// English ordinal for a 1-based index.
pub fn ordinal(n: usize) -> String {
    if (1..=ORDINALS.len()).contains(&n) {
        return ORDINALS[n - 1].to_string();
    }
    let suffix = match (n % 10, n % 100) {
        (1, r) if r != 11 => "st",
        (2, r) if r != 12 => "nd",
        (3, r) if r != 13 => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

pub fn parse_ordinal(text: &str) -> Option<usize> {
    if let Some(i) = ORDINALS.iter().position(|&o| o == text) {
        return Some(i + 1);
    }
    let digits = text.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    let n: usize = digits.parse().ok()?;
    (ordinal(n) == text).then_some(n)
}

/// 1-based (row, column) of every node in the map's row layout.
fn coordinates(map: &TopologyMap) -> Vec<(usize, usize)> {
    let mut out = vec![(0, 0); map.node_count()];
    for (r, row) in map.rows().iter().enumerate() {
        for (c, &n) in row.iter().enumerate() {
            out[n] = (r + 1, c + 1);
        }
    }
    out
}

/// Renders prompts from a [`Templates`] set and parses them back.
#[derive(Clone, Debug)]
pub struct Renderer {
    templates: Templates,
    parser: parse::Parser,
}

impl Default for Renderer {
    fn default() -> Self {
        Self::new(Templates::bundled())
    }
}

impl Renderer {
    pub fn new(templates: Templates) -> Self {
        let parser = parse::Parser::new(&templates);
        Renderer { templates, parser }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(Self::new(Templates::from_toml(text)?))
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    /// Zero-shot bundle for any instance kind.
    pub fn render(&self, inst: &TaskInstance, opts: &RenderOptions) -> Result<PromptBundle> {
        if opts.cot_shots > 0 {
            return Err(Error::Render("chain-of-thought rendering needs a shot pool".into()));
        }
        self.render_with_shots(inst, opts, &[])
    }

    /// Renders `inst`, preceded by `opts.cot_shots` worked examples taken in
    /// order from `pool`.
    pub fn render_with_shots(
        &self,
        inst: &TaskInstance,
        opts: &RenderOptions,
        pool: &[TaskInstance],
    ) -> Result<PromptBundle> {
        let question = self.question(inst, opts)?;
        let variant = self.variant(inst, opts);
        if opts.cot_shots == 0 {
            return Ok(PromptBundle {
                system_prompt: self.templates.system.zero_shot.clone(),
                user_prompt: question.clone(),
                question,
                shots: Vec::new(),
                variant,
            });
        }
        self.assemble_cot(inst, opts, pool, question, variant)
    }

    fn variant(&self, inst: &TaskInstance, opts: &RenderOptions) -> Variant {
        let kind = inst.topology().kind();
        Variant {
            detailed_description: opts.detailed && matches!(kind, TopologyKind::Hexagon | TopologyKind::Triangle),
            coord_annotation: inst.order == Some(Order::SnakeCoord),
            cot_shots: opts.cot_shots,
        }
    }

    fn assemble_cot(
        &self,
        inst: &TaskInstance,
        opts: &RenderOptions,
        pool: &[TaskInstance],
        question: String,
        variant: Variant,
    ) -> Result<PromptBundle> {
        let n = opts.cot_shots as usize;
        if pool.len() < n {
            return Err(Error::Render(format!("{n} shots requested but the pool holds {}", pool.len())));
        }
        let mut shots = Vec::with_capacity(n);
        for shot in &pool[..n] {
            if shot.world == inst.world && shot.derivation == inst.derivation {
                return Err(Error::Render(format!("shot {} duplicates the target question", shot.id)));
            }
            shots.push(Shot {
                question: self.question(shot, opts)?,
                explanation: self.explanation(shot)?,
                answer: shot.ground_truth.join(", "),
            });
        }
        let t = &self.templates.cot;
        let mut blocks: Vec<String> = shots
            .iter()
            .map(|s| {
                format!(
                    "{}\n{}\n{}\n{}\n{}\n{}",
                    t.question, s.question, t.explanation, s.explanation, t.answer, s.answer
                )
            })
            .collect();
        blocks.push(format!("{}\n{}", t.question, question));
        Ok(PromptBundle {
            system_prompt: self.templates.system.cot.clone(),
            user_prompt: blocks.join("\n\n"),
            question,
            shots,
            variant,
        })
    }

    /// The question text, dispatched on the instance kind.
    pub fn question(&self, inst: &TaskInstance, opts: &RenderOptions) -> Result<String> {
        match inst.kind {
            TaskKind::LoopClosureLocal => self.render_local(inst, opts),
            TaskKind::PathGlobal => self.render_global(inst, opts),
            TaskKind::TreeKinship => self.render_tree(inst),
            TaskKind::SizeInference => self.render_size(inst),
        }
    }

    fn preamble(&self, world: &World, opts: &RenderOptions) -> Option<String> {
        if !opts.detailed {
            return None;
        }
        let size = match world.map.descriptor().topology {
            crate::topology::Topology::Hexagon { size } | crate::topology::Topology::Triangle { size } => size,
            _ => return None,
        };
        let template = match world.map.kind() {
            TopologyKind::Hexagon => &self.templates.detailed.hexagon,
            _ => &self.templates.detailed.triangle,
        };
        Some(fill(template, &[("size", &size.to_string())]))
    }

    fn walk_of<'a>(inst: &'a TaskInstance, expected: TaskKind) -> Result<&'a Walk> {
        if inst.kind != expected {
            return Err(Error::Render(format!(
                "cannot render a {} instance as {}",
                inst.kind.name(),
                expected.name()
            )));
        }
        inst.walk().ok_or_else(|| Error::Render(format!("{} instance without a walk", inst.id)))
    }

    fn object(world: &World, node: NodeId) -> String {
        with_article(world.label(node))
    }

    pub fn render_local(&self, inst: &TaskInstance, opts: &RenderOptions) -> Result<String> {
        let walk = Self::walk_of(inst, TaskKind::LoopClosureLocal)?;
        let world = inst.world()?;
        let t = &self.templates.local;
        let (last, init) = walk.steps.split_last().ok_or_else(|| Error::Render("empty walk".into()))?;
        let mut sentences = vec![fill(&t.start, &[("object", &Self::object(&world, walk.start))])];
        for step in init {
            sentences.push(fill(
                &t.step,
                &[("dir", &step.dir.to_string()), ("object", &Self::object(&world, step.node))],
            ));
        }
        sentences.push(fill(&t.question, &[("dir", &last.dir.to_string())]));
        let mut sections: Vec<String> = self.preamble(&world, opts).into_iter().collect();
        sections.push(sentences.join(" "));
        Ok(sections.join("\n"))
    }

    pub fn render_global(&self, inst: &TaskInstance, opts: &RenderOptions) -> Result<String> {
        let walk = Self::walk_of(inst, TaskKind::PathGlobal)?;
        let order = inst.order.ok_or_else(|| Error::Render("global instance without an order".into()))?;
        let world = inst.world()?;
        let t = &self.templates.global;
        let mut sections: Vec<String> = self.preamble(&world, opts).into_iter().collect();
        sections.push(self.map_section(&world, order, inst.metadata.seed)?);
        let mut nav = vec![fill(&t.start, &[("object", &Self::object(&world, walk.start))])];
        nav.extend(walk.steps.iter().map(|s| fill(&t.step, &[("dir", &s.dir.to_string())])));
        nav.push(t.question.clone());
        sections.push(nav.join(" "));
        Ok(sections.join("\n"))
    }

    fn map_section(&self, world: &World, order: Order, seed: u64) -> Result<String> {
        let t = &self.templates.global;
        let map = &world.map;
        let listing = map_listing(map, order, seed)?;
        let coords = coordinates(map);
        let coord_item = |n: NodeId| {
            let (r, c) = coords[n];
            fill(
                &t.coord,
                &[("object", &Self::object(world, n)), ("row", &r.to_string()), ("col", &c.to_string())],
            )
        };
        let mut sentences = vec![t.intro.clone()];
        match order {
            Order::RowMajor => {
                for (r, row) in map.rows().iter().enumerate() {
                    let items: Vec<String> = row.iter().map(|&n| Self::object(world, n)).collect();
                    sentences.push(fill(&t.row, &[("ordinal", &ordinal(r + 1)), ("objects", &join_list(&items))]));
                }
            }
            Order::Snake | Order::SnakeCoord => {
                let mut at = 0;
                for (r, row) in map.rows().iter().enumerate() {
                    let nodes = &listing[at..at + row.len()];
                    at += row.len();
                    let items: Vec<String> = nodes
                        .iter()
                        .map(|&n| if order == Order::SnakeCoord { coord_item(n) } else { Self::object(world, n) })
                        .collect();
                    if r > 0 {
                        sentences.push(t.snake_down.clone());
                    }
                    let span = if r % 2 == 0 { "left to right" } else { "right to left" };
                    sentences.push(fill(
                        &t.snake_row,
                        &[("ordinal", &ordinal(r + 1)), ("objects", &join_list(&items)), ("span", span)],
                    ));
                }
            }
            Order::Random => {
                for &n in &listing {
                    let (r, c) = coords[n];
                    sentences.push(fill(
                        &t.cell,
                        &[("row", &r.to_string()), ("col", &c.to_string()), ("object", &Self::object(world, n))],
                    ));
                }
            }
            Order::RingClockwise => {
                let items: Vec<String> = listing.iter().map(|&n| Self::object(world, n)).collect();
                sentences.push(fill(&t.ring, &[("objects", &join_list(&items))]));
            }
            Order::TreeDfs | Order::TreeBfs => {
                return Err(Error::Render("tree orders describe kinship prompts, not maps".into()))
            }
        }
        Ok(sentences.join(" "))
    }

    pub fn render_tree(&self, inst: &TaskInstance) -> Result<String> {
        let Derivation::Kinship { anchor, relation } = inst.derivation else {
            return Err(Error::Render(format!("cannot render a {} instance as a tree", inst.kind.name())));
        };
        let order = inst.order.unwrap_or(Order::TreeDfs);
        if !matches!(order, Order::TreeDfs | Order::TreeBfs) {
            return Err(Error::Render(format!("order {} does not apply to trees", order.name())));
        }
        let world = inst.world()?;
        let t = &self.templates.tree;
        let statements: Vec<String> = parent_child_pairs(&world.map, order)
            .into_iter()
            .map(|(p, c)| fill(&t.statement, &[("parent", world.label(p)), ("child", world.label(c))]))
            .collect();
        let template = match relation {
            Relation::Cousin => &t.cousin,
            Relation::GreatGreatGrandparent => &t.great_great_grandparent,
            Relation::GreatGreatGrandchildren => &t.great_great_grandchildren,
        };
        let question = format!("{} {}", fill(template, &[("object", world.label(anchor))]), t.multiple);
        Ok(format!("{}\n{question}", statements.join(" ")))
    }

    pub fn render_size(&self, inst: &TaskInstance) -> Result<String> {
        let walk = Self::walk_of(inst, TaskKind::SizeInference)?;
        let world = inst.world()?;
        let t = &self.templates.size;
        let bare = world.labels.is_empty();
        let mut sentences = vec![if bare {
            t.bare_start.clone()
        } else {
            fill(&t.start, &[("object", &Self::object(&world, walk.start))])
        }];
        for step in &walk.steps {
            let dir = step.dir.to_string();
            sentences.push(if bare {
                fill(&t.bare_move, &[("dir", &dir)])
            } else {
                fill(&t.step, &[("dir", &dir), ("object", &Self::object(&world, step.node))])
            });
        }
        Ok(format!("{}\n{}\n{}", t.intro, sentences.join(" "), t.question))
    }

    /// Step-by-step solution produced by replaying the instance.
    pub fn explanation(&self, inst: &TaskInstance) -> Result<String> {
        let world = inst.world()?;
        let t = &self.templates.cot;
        let the = |n: NodeId| world.label(n).to_string();
        let sentences: Vec<String> = match (&inst.derivation, inst.kind) {
            (Derivation::Walk(walk), TaskKind::SizeInference) => {
                let width = walk.steps.iter().take_while(|s| s.dir != Direction::Down).count() + 1;
                let downs = walk.steps.iter().filter(|s| s.dir == Direction::Down).count();
                vec![
                    fill(&t.width, &[("moves", &(width - 1).to_string()), ("width", &width.to_string())]),
                    fill(&t.height, &[("downs", &downs.to_string()), ("height", &(downs + 1).to_string())]),
                ]
            }
            (Derivation::Walk(walk), _) => {
                let mut out = vec![fill(&t.start, &[("object", &the(walk.start))])];
                let mut at = walk.start;
                for step in &walk.steps {
                    out.push(fill(
                        &t.step,
                        &[("dir", &step.dir.to_string()), ("from", &the(at)), ("to", &the(step.node))],
                    ));
                    at = step.node;
                }
                out
            }
            (Derivation::Kinship { anchor, relation }, _) => self.kinship_explanation(&world, *anchor, *relation)?,
        };
        Ok(sentences.join(" "))
    }

    fn kinship_explanation(&self, world: &World, anchor: NodeId, relation: Relation) -> Result<Vec<String>> {
        let t = &self.templates.cot;
        let map = &world.map;
        let names = |nodes: &[NodeId]| join_list(&nodes.iter().map(|&n| world.label(n)).collect::<Vec<_>>());
        let parent_of = |n: NodeId| {
            map.parent(n).ok_or_else(|| Error::Render(format!("{} has no parent", world.label(n))))
        };
        let mut out = Vec::new();
        match relation {
            Relation::GreatGreatGrandparent => {
                let mut at = anchor;
                for _ in 0..4 {
                    let p = parent_of(at)?;
                    out.push(fill(&t.parent, &[("child", world.label(at)), ("parent", world.label(p))]));
                    at = p;
                }
            }
            Relation::GreatGreatGrandchildren => {
                let mut layer = vec![anchor];
                for _ in 0..4 {
                    let next: Vec<NodeId> = layer.iter().flat_map(|&n| map.children(n)).collect();
                    out.push(fill(&t.children, &[("parents", &names(&layer)), ("children", &names(&next))]));
                    layer = next;
                }
            }
            Relation::Cousin => {
                let p = parent_of(anchor)?;
                let g = parent_of(p)?;
                out.push(fill(&t.parent, &[("child", world.label(anchor)), ("parent", world.label(p))]));
                out.push(fill(&t.parent, &[("child", world.label(p)), ("parent", world.label(g))]));
                let uncles: Vec<NodeId> = map.children(g).into_iter().filter(|&u| u != p).collect();
                out.push(fill(
                    &t.siblings,
                    &[("grandparent", world.label(g)), ("parent", world.label(p)), ("uncles", &names(&uncles))],
                ));
                out.push(fill(
                    &t.children,
                    &[("parents", &names(&uncles)), ("children", &names(&relatives(map, anchor, relation)))],
                ));
            }
        }
        Ok(out)
    }

    /// Parses a question produced by this renderer.
    pub fn parse(&self, question: &str) -> Result<ParsedPrompt> {
        self.parser.parse(question)
    }

    /// Parses a full user prompt, skipping any worked examples.
    pub fn parse_user_prompt(&self, user_prompt: &str) -> Result<ParsedPrompt> {
        let marker = format!("{}\n", self.templates.cot.question);
        let target = match user_prompt.rfind(&marker) {
            Some(i) => &user_prompt[i + marker.len()..],
            None => user_prompt,
        };
        self.parse(target)
    }
}
