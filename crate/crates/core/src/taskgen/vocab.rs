use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

const IMAGENET: &str = include_str!("../../data/imagenet_labels.txt");

/// Object names used to fill map locations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    labels: Vec<String>,
}

impl Vocabulary {
    /// Parses newline-delimited labels. Blank lines are skipped and labels are
    /// lowercased. Duplicates are rejected, as are labels the prompt parser
    /// could not delimit: punctuation, or an embedded `and a`/`and an`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let label = line.trim().to_lowercase();
            if label.is_empty() {
                continue;
            }
            if label.contains([',', '.', '(', ')']) {
                return Err(Error::Vocabulary(format!("line {}: label {label:?} contains punctuation", i + 1)));
            }
            if label.contains(" and a ") || label.contains(" and an ") || label.contains(" is the parent of ") {
                return Err(Error::Vocabulary(format!("line {}: label {label:?} would be ambiguous in a list", i + 1)));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::Vocabulary(format!("line {}: duplicate label {label:?}", i + 1)));
            }
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(Error::Vocabulary("no labels".into()));
        }
        Ok(Vocabulary { labels })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// The bundled ImageNet-1k class names (first synonym, lowercased, deduplicated).
    pub fn imagenet() -> Self {
        Self::from_text(IMAGENET).expect("bundled vocabulary is valid")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_vocabulary() {
        let v = Vocabulary::imagenet();
        assert_eq!(v.len(), 999);
        assert_eq!(v.labels()[1], "goldfish");
    }

    #[test]
    fn rejects_duplicates_and_punctuation() {
        assert!(Vocabulary::from_text("apple\nApple\n").is_err());
        assert!(Vocabulary::from_text("tench, tinca tinca\n").is_err());
        assert!(Vocabulary::from_text("\n\n").is_err());
        let v = Vocabulary::from_text("apple\n\n banana \n").unwrap();
        assert_eq!(v.labels(), ["apple", "banana"]);
    }
}
