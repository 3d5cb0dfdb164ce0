use std::collections::BTreeMap;
use std::sync::Arc;

use super::{LanguageModel, ProbDist, TokenId, Vocabulary, BOS_ID};
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_SMOOTHING_K: f64 = 0.1;

/// Sparse next-token counts observed after one context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextCounts {
    pub(super) total: u64,
    pub(super) counts: BTreeMap<TokenId, u64>,
}

impl ContextCounts {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, token: TokenId) -> u64 {
        self.counts.get(&token).copied().unwrap_or(0)
    }

    /// Nonzero `(token, count)` pairs in token order.
    pub fn iter(&self) -> impl Iterator<Item = (TokenId, u64)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }

    pub(super) fn add(&mut self, token: TokenId, n: u64) {
        *self.counts.entry(token).or_default() += n;
        self.total += n;
    }
}

/// Add-k smoothed n-gram model.
///
/// `P(w | c) = (count(c, w) + k) / (total(c) + k * |V|)`, where `c` is the
/// last `order - 1` ids of the context, left-padded with BOS.
#[derive(Debug, Clone)]
pub struct NGramModel {
    pub(super) order: usize,
    pub(super) smoothing_k: f64,
    pub(super) vocab: Arc<Vocabulary>,
    pub(super) contexts: BTreeMap<Vec<TokenId>, ContextCounts>,
}

impl PartialEq for NGramModel {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
            && self.smoothing_k.to_bits() == other.smoothing_k.to_bits()
            && self.vocab == other.vocab
            && self.contexts == other.contexts
    }
}

pub(super) fn validate_params(order: usize, smoothing_k: f64) -> Result<()> {
    if order < 1 {
        return Err(Error::InvalidArgument(format!("order must be >= 1, got {order}")));
    }
    if !(smoothing_k.is_finite() && smoothing_k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "smoothing k must be > 0, got {smoothing_k}"
        )));
    }
    Ok(())
}

impl NGramModel {
    /// Counts every length-`order` window of each sequence after padding it
    /// on the left with `order - 1` BOS ids.
    pub fn train<I, S>(
        corpus: I,
        order: usize,
        smoothing_k: f64,
        vocab: Arc<Vocabulary>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[TokenId]>,
    {
        validate_params(order, smoothing_k)?;
        let mut model = NGramModel {
            order,
            smoothing_k,
            vocab,
            contexts: BTreeMap::new(),
        };
        let pad = order - 1;
        let mut padded: Vec<TokenId> = Vec::new();
        for seq in corpus {
            let seq = seq.as_ref();
            if let Some(&bad) = seq.iter().find(|&&id| !model.vocab.contains_id(id)) {
                return Err(Error::InvalidArgument(format!(
                    "token id {bad} outside vocabulary of size {}",
                    model.vocab.len()
                )));
            }
            padded.clear();
            padded.resize(pad, BOS_ID);
            padded.extend_from_slice(seq);
            for window in padded.windows(order) {
                let (ctx, next) = window.split_at(pad);
                match model.contexts.get_mut(ctx) {
                    Some(cc) => cc.add(next[0], 1),
                    None => {
                        let mut cc = ContextCounts::default();
                        cc.add(next[0], 1);
                        model.contexts.insert(ctx.to_vec(), cc);
                    }
                }
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_k(&self) -> f64 {
        self.smoothing_k
    }

    /// The `order - 1` ids a prediction conditions on.
    pub fn context_key(&self, context: &[TokenId]) -> Vec<TokenId> {
        let pad = self.order - 1;
        let tail = &context[context.len().saturating_sub(pad)..];
        let mut key = vec![BOS_ID; pad - tail.len()];
        key.extend_from_slice(tail);
        key
    }

    pub fn count(&self, context: &[TokenId], token: TokenId) -> u64 {
        self.contexts.get(context).map_or(0, |cc| cc.get(token))
    }

    pub fn context_total(&self, context: &[TokenId]) -> u64 {
        self.contexts.get(context).map_or(0, ContextCounts::total)
    }

    /// Observed contexts with their counts, in key order.
    pub fn contexts(&self) -> impl Iterator<Item = (&[TokenId], &ContextCounts)> {
        self.contexts.iter().map(|(k, v)| (k.as_slice(), v))
    }

    /// Number of training tokens counted.
    pub fn token_count(&self) -> u64 {
        self.contexts.values().map(ContextCounts::total).sum()
    }
}

impl LanguageModel for NGramModel {
    fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn next_token_dist(&self, context: &[TokenId]) -> ProbDist {
        let v = self.vocab.len();
        let key = self.context_key(context);
        let Some(cc) = self.contexts.get(&key) else {
            return ProbDist::uniform(v);
        };
        let k = self.smoothing_k;
        let denom = cc.total as f64 + k * v as f64;
        let mut probs = vec![k / denom; v];
        for (&tok, &c) in &cc.counts {
            probs[tok as usize] = (c as f64 + k) / denom;
        }
        ProbDist::from_normalized(probs)
    }
}
