use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../templates/en.toml");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemTemplates {
    pub zero_shot: String,
    pub cot: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalTemplates {
    pub start: String,
    #[serde(rename = "move")]
    pub step: String,
    pub question: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalTemplates {
    pub intro: String,
    pub row: String,
    pub snake_row: String,
    pub snake_down: String,
    pub cell: String,
    pub coord: String,
    pub ring: String,
    pub start: String,
    #[serde(rename = "move")]
    pub step: String,
    pub question: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeTemplates {
    pub statement: String,
    pub cousin: String,
    pub great_great_grandparent: String,
    pub great_great_grandchildren: String,
    pub multiple: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeTemplates {
    pub intro: String,
    pub start: String,
    #[serde(rename = "move")]
    pub step: String,
    pub bare_start: String,
    pub bare_move: String,
    pub question: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetailedTemplates {
    pub hexagon: String,
    pub triangle: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CotTemplates {
    pub question: String,
    pub explanation: String,
    pub answer: String,
    pub start: String,
    pub step: String,
    pub parent: String,
    pub children: String,
    pub siblings: String,
    pub width: String,
    pub height: String,
}

/// Every sentence the renderer can emit, keyed by task kind and variant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Templates {
    pub system: SystemTemplates,
    pub local: LocalTemplates,
    pub global: GlobalTemplates,
    pub tree: TreeTemplates,
    pub size: SizeTemplates,
    pub detailed: DetailedTemplates,
    pub cot: CotTemplates,
}

impl Templates {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED).expect("bundled templates are valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let t: Templates = toml::from_str(text).map_err(|e| Error::Config(format!("templates: {e}")))?;
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        let required: &[(&str, &str, &[&str])] = &[
            ("system.zero_shot", self.system.zero_shot.as_str(), &[]),
            ("system.cot", self.system.cot.as_str(), &[]),
            ("local.start", self.local.start.as_str(), &["object"]),
            ("local.move", self.local.step.as_str(), &["dir", "object"]),
            ("local.question", self.local.question.as_str(), &["dir"]),
            ("global.intro", self.global.intro.as_str(), &[]),
            ("global.row", self.global.row.as_str(), &["ordinal", "objects"]),
            ("global.snake_row", self.global.snake_row.as_str(), &["ordinal", "objects", "span"]),
            ("global.snake_down", self.global.snake_down.as_str(), &[]),
            ("global.cell", self.global.cell.as_str(), &["row", "col", "object"]),
            ("global.coord", self.global.coord.as_str(), &["object", "row", "col"]),
            ("global.ring", self.global.ring.as_str(), &["objects"]),
            ("global.start", self.global.start.as_str(), &["object"]),
            ("global.move", self.global.step.as_str(), &["dir"]),
            ("global.question", self.global.question.as_str(), &[]),
            ("tree.statement", self.tree.statement.as_str(), &["parent", "child"]),
            ("tree.cousin", self.tree.cousin.as_str(), &["object"]),
            ("tree.great_great_grandparent", self.tree.great_great_grandparent.as_str(), &["object"]),
            ("tree.great_great_grandchildren", self.tree.great_great_grandchildren.as_str(), &["object"]),
            ("tree.multiple", self.tree.multiple.as_str(), &[]),
            ("size.intro", self.size.intro.as_str(), &[]),
            ("size.start", self.size.start.as_str(), &["object"]),
            ("size.move", self.size.step.as_str(), &["dir", "object"]),
            ("size.bare_start", self.size.bare_start.as_str(), &[]),
            ("size.bare_move", self.size.bare_move.as_str(), &["dir"]),
            ("size.question", self.size.question.as_str(), &[]),
            ("detailed.hexagon", self.detailed.hexagon.as_str(), &["size"]),
            ("detailed.triangle", self.detailed.triangle.as_str(), &["size"]),
            ("cot.start", self.cot.start.as_str(), &["object"]),
            ("cot.step", self.cot.step.as_str(), &["dir", "from", "to"]),
            ("cot.parent", self.cot.parent.as_str(), &["child", "parent"]),
            ("cot.children", self.cot.children.as_str(), &["parents", "children"]),
            ("cot.siblings", self.cot.siblings.as_str(), &["grandparent", "parent", "uncles"]),
            ("cot.width", self.cot.width.as_str(), &["moves", "width"]),
            ("cot.height", self.cot.height.as_str(), &["downs", "height"]),
        ];
        for &(key, template, names) in required {
            let found = placeholders(template).map_err(|m| Error::Config(format!("template {key}: {m}")))?;
            let mut expected: Vec<&str> = names.to_vec();
            let mut got: Vec<&str> = found.iter().map(String::as_str).collect();
            expected.sort_unstable();
            got.sort_unstable();
            if expected != got {
                return Err(Error::Config(format!("template {key} must use placeholders {names:?}, found {got:?}")));
            }
        }
        Ok(())
    }
}

enum Segment<'a> {
    Literal(&'a str),
    Hole(&'a str),
}

fn segments(template: &str) -> std::result::Result<Vec<Segment<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..].find('}').ok_or("unclosed '{'")? + open;
        if open > 0 {
            out.push(Segment::Literal(&rest[..open]));
        }
        let name = &rest[open + 1..close];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            return Err(format!("bad placeholder {{{name}}}"));
        }
        if matches!(out.last(), Some(Segment::Hole(_))) {
            return Err("adjacent placeholders cannot be parsed back".into());
        }
        out.push(Segment::Hole(name));
        rest = &rest[close + 1..];
    }
    if rest.contains('}') {
        return Err("unmatched '}'".into());
    }
    if !rest.is_empty() {
        out.push(Segment::Literal(rest));
    }
    Ok(out)
}

fn placeholders(template: &str) -> std::result::Result<Vec<String>, String> {
    let names: Vec<String> = segments(template)?
        .into_iter()
        .filter_map(|s| match s {
            Segment::Hole(h) => Some(h.to_string()),
            Segment::Literal(_) => None,
        })
        .collect();
    let mut sorted = names.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != names.len() {
        return Err("repeated placeholder".into());
    }
    Ok(names)
}

/// Substitutes `{name}` holes. Unknown names are left in place.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let Ok(segs) = segments(template) else {
        return template.to_string();
    };
    let mut out = String::with_capacity(template.len() + 32);
    for seg in segs {
        match seg {
            Segment::Literal(l) => out.push_str(l),
            Segment::Hole(h) => match values.iter().find(|(k, _)| *k == h) {
                Some((_, v)) => out.push_str(v),
                None => {
                    out.push('{');
                    out.push_str(h);
                    out.push('}');
                }
            },
        }
    }
    out
}

/// Regex source matching `template`, each hole replaced by a named group
/// with the given sub-pattern.
pub fn pattern_source(template: &str, groups: &[(&str, &str)]) -> String {
    let segs = segments(template).expect("templates are validated on load");
    let mut out = String::new();
    for seg in segs {
        match seg {
            Segment::Literal(l) => out.push_str(&regex::escape(l)),
            Segment::Hole(h) => {
                let sub = groups.iter().find(|(k, _)| *k == h).map_or(".+?", |(_, v)| v);
                out.push_str(&format!("(?P<{h}>{sub})"));
            }
        }
    }
    out
}

/// Anchored pattern that also swallows leading whitespace.
pub fn anchored(template: &str, groups: &[(&str, &str)]) -> Regex {
    Regex::new(&format!(r"^\s*{}", pattern_source(template, groups))).expect("escaped template compiles")
}
