use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use super::templates::{anchored, pattern_source, Templates};
use super::{parse_ordinal, strip_article};
use crate::error::{Error, Result};
use crate::taskgen::{Relation, Setting, Step, Walk, World};
use crate::topology::Direction;

const OBJECT: &str = r"an? [^,.?()]+?";
const OBJECTS: &str = r"[^.?]+?";
const BARE: &str = r"[^,.?()]+?";
const NUMBER: &str = r"\d+";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListedObject {
    pub label: String,
    /// 1-based coordinates when the prompt states them.
    pub row: Option<usize>,
    pub col: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedMove {
    pub dir: Direction,
    pub found: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParsedQuestion {
    /// "What do you find?"; the local form names the final direction.
    Find,
    Kinship { relation: Relation, anchor: String },
    Size,
}

/// Structured content recovered from a rendered question.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedPrompt {
    pub detailed: bool,
    pub setting: Option<Setting>,
    /// Global map listing in the order written.
    pub listing: Vec<ListedObject>,
    /// Rows of a row-based listing, each left to right.
    pub rows: Vec<Vec<String>>,
    pub start: Option<String>,
    pub moves: Vec<ParsedMove>,
    /// Parent/child statements of a tree prompt.
    pub pairs: Vec<(String, String)>,
    pub question: Option<ParsedQuestion>,
}

impl ParsedPrompt {
    /// Every object mention in reading order, repeats included.
    pub fn mentions(&self) -> Vec<String> {
        let mut out: Vec<String> = self.listing.iter().map(|o| o.label.clone()).collect();
        for (p, c) in &self.pairs {
            out.push(p.clone());
            out.push(c.clone());
        }
        out.extend(self.start.iter().cloned());
        out.extend(self.moves.iter().filter_map(|m| m.found.clone()));
        if let Some(ParsedQuestion::Kinship { anchor, .. }) = &self.question {
            out.push(anchor.clone());
        }
        out
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.moves.iter().map(|m| m.dir).collect()
    }

    /// Replays the parsed directions on `world` from the named start. For
    /// unlabeled worlds the walk starts at node 0.
    pub fn walk(&self, world: &World) -> Result<Walk> {
        let start = match &self.start {
            Some(label) => world
                .node_of(label)
                .ok_or_else(|| Error::Parse(format!("start object {label:?} is not on the map")))?,
            None if world.labels.is_empty() => 0,
            None => return Err(Error::Parse("prompt names no start".into())),
        };
        let mut at = start;
        let mut steps = Vec::with_capacity(self.moves.len());
        for m in &self.moves {
            at = world
                .map
                .step(at, m.dir)
                .ok_or_else(|| Error::Parse(format!("cannot move {} from node {at}", m.dir)))?;
            if let Some(found) = &m.found {
                if world.labels[at] != *found {
                    return Err(Error::Parse(format!("expected {found:?} at node {at}")));
                }
            }
            steps.push(Step { dir: m.dir, node: at });
        }
        Ok(Walk { start, steps, setting: self.setting.unwrap_or(Setting::Local) })
    }
}

#[derive(Clone, Debug)]
struct Patterns {
    detailed: Vec<Regex>,
    local_start: Regex,
    local_move: Regex,
    local_question: Regex,
    global_intro: Regex,
    row: Regex,
    snake_row: Regex,
    snake_down: Regex,
    cell: Regex,
    coord: Regex,
    ring: Regex,
    global_start: Regex,
    global_move: Regex,
    global_question: Regex,
    statement: Regex,
    kinship: Vec<(Relation, Regex)>,
    multiple: Regex,
    size_intro: Regex,
    size_start: Regex,
    size_move: Regex,
    size_bare_start: Regex,
    size_bare_move: Regex,
    size_question: Regex,
}

#[derive(Clone, Debug)]
pub(super) struct Parser {
    p: Patterns,
}

fn direction_pattern() -> String {
    let mut tokens: Vec<String> = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
        Direction::UpperLeft,
        Direction::UpperRight,
        Direction::LowerLeft,
        Direction::LowerRight,
        Direction::Clockwise,
        Direction::Counterclockwise,
    ]
    .iter()
    .map(|d| regex::escape(&d.to_string()))
    .collect();
    tokens.sort_by_key(|t| std::cmp::Reverse(t.len()));
    tokens.join("|")
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn eat(&mut self, re: &Regex) -> Option<Captures<'a>> {
        let caps = re.captures(&self.text[self.pos..])?;
        self.pos += caps.get(0).map_or(0, |m| m.end());
        Some(caps)
    }

    fn done(&self) -> bool {
        self.text[self.pos..].trim().is_empty()
    }

    fn error(&self, what: &str) -> Error {
        let rest: String = self.text[self.pos..].trim_start().chars().take(60).collect();
        Error::Parse(format!("expected {what} at byte {}: {rest:?}", self.pos))
    }
}

fn object(caps: &Captures, group: &str) -> Result<String> {
    let text = &caps[group];
    strip_article(text)
        .map(str::to_string)
        .ok_or_else(|| Error::Parse(format!("{text:?} lacks the expected article")))
}

fn direction(caps: &Captures) -> Result<Direction> {
    caps["dir"].parse().map_err(|_| Error::Parse(format!("unknown direction {:?}", &caps["dir"])))
}

fn number(caps: &Captures, group: &str) -> Result<usize> {
    caps[group].parse().map_err(|_| Error::Parse(format!("bad number {:?}", &caps[group])))
}

impl Parser {
    pub(super) fn new(t: &Templates) -> Self {
        let dir = direction_pattern();
        let d = dir.as_str();
        let coord_source = pattern_source(&t.global.coord, &[("object", OBJECT), ("row", NUMBER), ("col", NUMBER)]);
        let p = Patterns {
            detailed: [&t.detailed.hexagon, &t.detailed.triangle]
                .into_iter()
                .map(|tpl| anchored(tpl, &[("size", NUMBER)]))
                .collect(),
            local_start: anchored(&t.local.start, &[("object", OBJECT)]),
            local_move: anchored(&t.local.step, &[("dir", d), ("object", OBJECT)]),
            local_question: anchored(&t.local.question, &[("dir", d)]),
            global_intro: anchored(&t.global.intro, &[]),
            row: anchored(&t.global.row, &[("ordinal", r"[0-9a-z]+"), ("objects", OBJECTS)]),
            snake_row: anchored(
                &t.global.snake_row,
                &[("ordinal", r"[0-9a-z]+"), ("objects", OBJECTS), ("span", "left to right|right to left")],
            ),
            snake_down: anchored(&t.global.snake_down, &[]),
            cell: anchored(&t.global.cell, &[("row", NUMBER), ("col", NUMBER), ("object", OBJECT)]),
            coord: Regex::new(&coord_source).expect("escaped template compiles"),
            ring: anchored(&t.global.ring, &[("objects", OBJECTS)]),
            global_start: anchored(&t.global.start, &[("object", OBJECT)]),
            global_move: anchored(&t.global.step, &[("dir", d)]),
            global_question: anchored(&t.global.question, &[]),
            statement: anchored(&t.tree.statement, &[("parent", BARE), ("child", BARE)]),
            kinship: vec![
                (Relation::Cousin, anchored(&t.tree.cousin, &[("object", BARE)])),
                (Relation::GreatGreatGrandparent, anchored(&t.tree.great_great_grandparent, &[("object", BARE)])),
                (
                    Relation::GreatGreatGrandchildren,
                    anchored(&t.tree.great_great_grandchildren, &[("object", BARE)]),
                ),
            ],
            multiple: anchored(&t.tree.multiple, &[]),
            size_intro: anchored(&t.size.intro, &[]),
            size_start: anchored(&t.size.start, &[("object", OBJECT)]),
            size_move: anchored(&t.size.step, &[("dir", d), ("object", OBJECT)]),
            size_bare_start: anchored(&t.size.bare_start, &[]),
            size_bare_move: anchored(&t.size.bare_move, &[("dir", d)]),
            size_question: anchored(&t.size.question, &[]),
        };
        Parser { p }
    }

    pub(super) fn parse(&self, text: &str) -> Result<ParsedPrompt> {
        let mut cur = Cursor { text, pos: 0 };
        let mut out = ParsedPrompt::default();
        let p = &self.p;
        out.detailed = p.detailed.iter().any(|re| cur.eat(re).is_some());
        if cur.eat(&p.size_intro).is_some() {
            self.parse_size(&mut cur, &mut out)?;
        } else if cur.eat(&p.global_intro).is_some() {
            self.parse_global(&mut cur, &mut out)?;
        } else if p.statement.is_match(&cur.text[cur.pos..]) {
            self.parse_tree(&mut cur, &mut out)?;
        } else {
            self.parse_local(&mut cur, &mut out)?;
        }
        if !cur.done() {
            return Err(cur.error("end of prompt"));
        }
        Ok(out)
    }

    fn parse_local(&self, cur: &mut Cursor, out: &mut ParsedPrompt) -> Result<()> {
        let p = &self.p;
        out.setting = Some(Setting::Local);
        let caps = cur.eat(&p.local_start).ok_or_else(|| cur.error("the starting sentence"))?;
        out.start = Some(object(&caps, "object")?);
        while let Some(caps) = cur.eat(&p.local_move) {
            out.moves.push(ParsedMove { dir: direction(&caps)?, found: Some(object(&caps, "object")?) });
        }
        let caps = cur.eat(&p.local_question).ok_or_else(|| cur.error("a move or the final question"))?;
        out.moves.push(ParsedMove { dir: direction(&caps)?, found: None });
        out.question = Some(ParsedQuestion::Find);
        Ok(())
    }

    fn split_objects(&self, list: &str) -> Result<Vec<ListedObject>> {
        if self.p.coord.is_match(list) {
            return self
                .p
                .coord
                .captures_iter(list)
                .map(|caps| {
                    Ok(ListedObject {
                        label: object(&caps, "object")?,
                        row: Some(number(&caps, "row")?),
                        col: Some(number(&caps, "col")?),
                    })
                })
                .collect();
        }
        let parts: Vec<&str> = if list.contains(", ") {
            let mut parts: Vec<&str> = list.split(", ").collect();
            let last = parts.last_mut().expect("split yields an item");
            *last = last.strip_prefix("and ").ok_or_else(|| Error::Parse(format!("list {list:?} lacks 'and'")))?;
            parts
        } else if let Some(i) = list.find(" and an ").or_else(|| list.find(" and a ")) {
            vec![&list[..i], &list[i + " and ".len()..]]
        } else {
            vec![list]
        };
        parts
            .into_iter()
            .map(|part| {
                let label = strip_article(part).ok_or_else(|| Error::Parse(format!("{part:?} lacks an article")))?;
                Ok(ListedObject { label: label.to_string(), row: None, col: None })
            })
            .collect()
    }

    fn push_row(&self, out: &mut ParsedPrompt, caps: &Captures) -> Result<()> {
        let n = parse_ordinal(&caps["ordinal"])
            .ok_or_else(|| Error::Parse(format!("bad ordinal {:?}", &caps["ordinal"])))?;
        if n != out.rows.len() + 1 {
            return Err(Error::Parse(format!("row {n} out of sequence")));
        }
        let items = self.split_objects(&caps["objects"])?;
        let reversed = caps.name("span").is_some_and(|s| s.as_str() == "right to left");
        if let Some(bad) = items.iter().find(|o| o.row.is_some_and(|r| r != n)) {
            return Err(Error::Parse(format!("{} annotated with the wrong row", bad.label)));
        }
        let mut labels: Vec<String> = items.iter().map(|o| o.label.clone()).collect();
        if reversed {
            labels.reverse();
        }
        out.rows.push(labels);
        out.listing.extend(items);
        Ok(())
    }

    fn parse_global(&self, cur: &mut Cursor, out: &mut ParsedPrompt) -> Result<()> {
        let p = &self.p;
        out.setting = Some(Setting::Global);
        loop {
            let save = cur.pos;
            let transition = cur.eat(&p.snake_down).is_some();
            if let Some(caps) = cur.eat(&p.snake_row) {
                if transition != !out.rows.is_empty() {
                    return Err(cur.error("a row transition"));
                }
                self.push_row(out, &caps)?;
            } else if transition {
                cur.pos = save;
                return Err(cur.error("a row after the transition"));
            } else if let Some(caps) = cur.eat(&p.row) {
                self.push_row(out, &caps)?;
            } else if let Some(caps) = cur.eat(&p.cell) {
                out.listing.push(ListedObject {
                    label: object(&caps, "object")?,
                    row: Some(number(&caps, "row")?),
                    col: Some(number(&caps, "col")?),
                });
            } else if let Some(caps) = cur.eat(&p.ring) {
                out.listing.extend(self.split_objects(&caps["objects"])?);
            } else {
                break;
            }
        }
        if out.listing.is_empty() {
            return Err(cur.error("a map description"));
        }
        let caps = cur.eat(&p.global_start).ok_or_else(|| cur.error("the starting sentence"))?;
        out.start = Some(object(&caps, "object")?);
        while let Some(caps) = cur.eat(&p.global_move) {
            out.moves.push(ParsedMove { dir: direction(&caps)?, found: None });
        }
        cur.eat(&p.global_question).ok_or_else(|| cur.error("a move or the final question"))?;
        out.question = Some(ParsedQuestion::Find);
        Ok(())
    }

    fn parse_tree(&self, cur: &mut Cursor, out: &mut ParsedPrompt) -> Result<()> {
        let p = &self.p;
        out.setting = Some(Setting::Global);
        while let Some(caps) = cur.eat(&p.statement) {
            out.pairs.push((caps["parent"].to_string(), caps["child"].to_string()));
        }
        let (relation, caps) = p
            .kinship
            .iter()
            .find_map(|(r, re)| cur.eat(re).map(|c| (*r, c)))
            .ok_or_else(|| cur.error("a kinship question"))?;
        out.question = Some(ParsedQuestion::Kinship { relation, anchor: caps["object"].to_string() });
        cur.eat(&p.multiple);
        Ok(())
    }

    fn parse_size(&self, cur: &mut Cursor, out: &mut ParsedPrompt) -> Result<()> {
        let p = &self.p;
        out.setting = Some(Setting::Local);
        if let Some(caps) = cur.eat(&p.size_start) {
            out.start = Some(object(&caps, "object")?);
            while let Some(caps) = cur.eat(&p.size_move) {
                out.moves.push(ParsedMove { dir: direction(&caps)?, found: Some(object(&caps, "object")?) });
            }
        } else {
            cur.eat(&p.size_bare_start).ok_or_else(|| cur.error("the starting sentence"))?;
            while let Some(caps) = cur.eat(&p.size_bare_move) {
                out.moves.push(ParsedMove { dir: direction(&caps)?, found: None });
            }
        }
        cur.eat(&p.size_question).ok_or_else(|| cur.error("the size question"))?;
        out.question = Some(ParsedQuestion::Size);
        Ok(())
    }
}
