//! Line-based model file.
//!
//! ```text
//! detox-ngram v1
//! order 3
//! k 0.1
//! vocab 4
//! <s>
//! <unk>
//! a
//! b
//! contexts 2
//! 0 0|2:1
//! 0 2|3:2 2:1
//! ```
//!
//! Each context line holds the space-separated context ids, a `|`, and the
//! nonzero `token:count` pairs. `k` is written in shortest round-trip form,
//! so a reloaded model yields bit-identical distributions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use super::ngram::{validate_params, ContextCounts, NGramModel};
use super::{TokenId, Vocabulary};
use crate::error::{Error, Result};

const MAGIC: &str = "detox-ngram v1";

impl NGramModel {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "order {}", self.order)?;
        writeln!(w, "k {:?}", self.smoothing_k)?;
        writeln!(w, "vocab {}", self.vocab.len())?;
        for t in self.vocab.tokens() {
            writeln!(w, "{t}")?;
        }
        writeln!(w, "contexts {}", self.contexts.len())?;
        let mut line = String::new();
        for (ctx, cc) in &self.contexts {
            line.clear();
            for (i, id) in ctx.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&id.to_string());
            }
            line.push('|');
            for (i, (tok, c)) in cc.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{tok}:{c}"));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, l)) => Ok((n, l?)),
                None => Err(Error::ModelFormat(format!("unexpected end of file, expected {what}"))),
            }
        };
        let bad = |n: usize, msg: String| Error::ModelFormat(format!("line {n}: {msg}"));

        let (n, magic) = next("header")?;
        if magic != MAGIC {
            return Err(bad(n, format!("unrecognized header {magic:?}")));
        }
        let order: usize = header_value(next("order")?, "order")?;
        let smoothing_k: f64 = header_value(next("k")?, "k")?;
        validate_params(order, smoothing_k).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let vocab_len: usize = header_value(next("vocab")?, "vocab")?;
        if vocab_len < 2 {
            return Err(Error::ModelFormat(format!("vocab size {vocab_len} too small")));
        }
        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            tokens.push(next("vocabulary token")?.1);
        }
        let vocab = Vocabulary::from_tokens(tokens.into_iter().skip(2))
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let n_contexts: usize = header_value(next("contexts")?, "contexts")?;
        let pad = order - 1;
        let mut contexts = BTreeMap::new();
        for _ in 0..n_contexts {
            let (n, line) = next("context line")?;
            let (ctx_part, counts_part) = line
                .split_once('|')
                .ok_or_else(|| bad(n, "missing `|`".into()))?;
            let ctx = parse_ids(ctx_part, vocab.len()).map_err(|m| bad(n, m))?;
            if ctx.len() != pad {
                return Err(bad(n, format!("context length {} != {pad}", ctx.len())));
            }
            let mut cc = ContextCounts::default();
            for pair in counts_part.split_whitespace() {
                let (tok, count) = pair
                    .split_once(':')
                    .ok_or_else(|| bad(n, format!("bad pair {pair:?}")))?;
                let tok = parse_ids(tok, vocab.len()).map_err(|m| bad(n, m))?;
                let count: u64 = count.parse().map_err(|_| bad(n, format!("bad count {count:?}")))?;
                if tok.len() != 1 || count == 0 || cc.counts.contains_key(&tok[0]) {
                    return Err(bad(n, format!("bad pair {pair:?}")));
                }
                cc.add(tok[0], count);
            }
            if contexts.insert(ctx, cc).is_some() {
                return Err(bad(n, "duplicate context".into()));
            }
        }
        Ok(NGramModel {
            order,
            smoothing_k,
            vocab: Arc::new(vocab),
            contexts,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn header_value<T: std::str::FromStr>((n, line): (usize, String), key: &str) -> Result<T> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::ModelFormat(format!("line {n}: expected `{key} <value>`, got {line:?}")))
}

fn parse_ids(s: &str, vocab_len: usize) -> std::result::Result<Vec<TokenId>, String> {
    s.split_whitespace()
        .map(|t| match t.parse::<TokenId>() {
            Ok(id) if (id as usize) < vocab_len => Ok(id),
            _ => Err(format!("bad token id {t:?}")),
        })
        .collect()
}
