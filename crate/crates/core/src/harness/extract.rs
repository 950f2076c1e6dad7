use std::collections::BTreeSet;

use crate::taskgen::{AnswerMode, TaskInstance};

pub const KEYWORD: &str = "Answer:";

/// Raw answer items: the first non-empty line after the last `Answer:`,
/// split on commas, each trimmed, stripped of a trailing period and
/// lowercased. Empty items are dropped; order and repeats are kept.
pub fn extract_answer_items(raw: &str) -> Vec<String> {
    let Some(at) = raw.rfind(KEYWORD) else {
        return Vec::new();
    };
    let Some(line) = raw[at + KEYWORD.len()..].lines().map(str::trim).find(|l| !l.is_empty()) else {
        return Vec::new();
    };
    line.split(',')
        .map(|item| item.trim().trim_end_matches(|c: char| c == '.' || c.is_whitespace()).to_lowercase())
        .filter(|item| !item.is_empty())
        .collect()
}

/// The answer set; empty when the keyword is missing.
pub fn extract_answer(raw: &str) -> BTreeSet<String> {
    extract_answer_items(raw).into_iter().collect()
}

/// Exact match against the ground truth: set equality, or element-wise
/// equality for ordered answers.
pub fn is_correct(inst: &TaskInstance, raw: &str) -> bool {
    let items = extract_answer_items(raw);
    match inst.answer_mode {
        AnswerMode::Set => {
            let truth: BTreeSet<String> = inst.ground_truth.iter().map(|s| s.to_lowercase()).collect();
            items.into_iter().collect::<BTreeSet<_>>() == truth
        }
        AnswerMode::Ordered => items.len() == inst.ground_truth.len()
            && items.iter().zip(&inst.ground_truth).all(|(a, b)| *a == b.to_lowercase()),
    }
}

/// Canonical response text for an answer.
pub fn format_answer<S: AsRef<str>>(items: &[S]) -> String {
    let parts: Vec<&str> = items.iter().map(AsRef::as_ref).collect();
    format!("{KEYWORD} {}", parts.join(", "))
}
