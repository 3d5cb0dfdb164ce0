use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::{Attribute, AttributeScores, Scorer};
use crate::error::{Error, Result};
use crate::text::tokenize;

const DEFAULT_LEXICON: &str = include_str!("../../data/default_lexicon.tsv");

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub term: String,
    pub weight: f64,
    tokens: Vec<String>,
}

/// Weighted terms per attribute.
///
/// Text format: one `attribute<TAB>term<TAB>weight` per line; blank lines
/// and lines starting with `#` are skipped. Terms may span several tokens.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: [Vec<LexiconEntry>; Attribute::COUNT],
    // first token -> (attribute, entry index)
    by_first: HashMap<String, Vec<(Attribute, usize)>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// The lexicon bundled with the crate.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn insert(&mut self, attr: Attribute, term: &str, weight: f64) -> Result<()> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "weight {weight} for {term:?} outside (0,1]"
            )));
        }
        if term != term.to_lowercase() {
            return Err(Error::InvalidArgument(format!("term {term:?} is not lowercase")));
        }
        let tokens = tokenize(term);
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("empty lexicon term".into()));
        }
        let list = &mut self.entries[attr.index()];
        if list.iter().any(|e| e.tokens == tokens) {
            return Err(Error::InvalidArgument(format!(
                "duplicate term {term:?} for {attr}"
            )));
        }
        self.by_first
            .entry(tokens[0].clone())
            .or_default()
            .push((attr, list.len()));
        list.push(LexiconEntry {
            term: term.to_string(),
            weight,
            tokens,
        });
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let fields: Vec<&str> = line.split('\t').collect();
            let [attr, term, weight] = fields[..] else {
                return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let attr = Attribute::from_name(attr.trim())
                .ok_or_else(|| err(format!("unknown attribute {attr:?}")))?;
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| err(format!("bad weight {weight:?}")))?;
            lex.insert(attr, term.trim(), weight)
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self, attr: Attribute) -> &[LexiconEntry] {
        &self.entries[attr.index()]
    }

    /// Every distinct term across all attributes, sorted.
    pub fn terms(&self) -> Vec<&str> {
        let set: HashSet<&str> = self
            .entries
            .iter()
            .flatten()
            .map(|e| e.term.as_str())
            .collect();
        let mut v: Vec<&str> = set.into_iter().collect();
        v.sort_unstable();
        v
    }
}

/// Saturating product score: `1 - prod(1 - w_i)` over every matched term
/// occurrence, per attribute.
pub fn score_lexicon(text: &str, lexicon: &Lexicon) -> AttributeScores {
    let tokens = tokenize(text);
    let mut keep = [1.0f64; Attribute::COUNT];
    for start in 0..tokens.len() {
        let Some(cands) = lexicon.by_first.get(&tokens[start]) else {
            continue;
        };
        for &(attr, idx) in cands {
            let entry = &lexicon.entries[attr.index()][idx];
            if tokens[start..].starts_with(&entry.tokens) {
                keep[attr.index()] *= 1.0 - entry.weight;
            }
        }
    }
    AttributeScores::new(keep.map(|k| 1.0 - k)).expect("product of factors in [0,1]")
}

#[derive(Debug, Clone)]
pub struct LexiconScorer {
    lexicon: Lexicon,
}

impl LexiconScorer {
    pub fn new(lexicon: Lexicon) -> Self {
        LexiconScorer { lexicon }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl Scorer for LexiconScorer {
    fn score(&self, text: &str) -> Result<AttributeScores> {
        Ok(score_lexicon(text, &self.lexicon))
    }
}
