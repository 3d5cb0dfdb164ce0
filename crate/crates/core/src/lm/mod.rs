//! Vocabulary, probability distributions and add-k smoothed n-gram models.

mod dist;
mod format;
mod ngram;
mod vocab;

use std::sync::Arc;

pub use dist::ProbDist;
pub(crate) use dist::argmax as dist_argmax;
pub use ngram::{ContextCounts, NGramModel, DEFAULT_ORDER, DEFAULT_SMOOTHING_K};
pub use vocab::{TokenId, Vocabulary, BOS_ID, BOS_TOKEN, UNK_ID, UNK_TOKEN};

/// A conditional next-token model over a fixed vocabulary.
pub trait LanguageModel: Send + Sync {
    fn vocab(&self) -> &Arc<Vocabulary>;

    /// Distribution over the next token given the preceding ids.
    fn next_token_dist(&self, context: &[TokenId]) -> ProbDist;
}
