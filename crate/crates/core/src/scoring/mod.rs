//! Eight-attribute toxicity scoring.

mod attributes;
mod config;
mod lexicon;
mod remote;

pub use attributes::{classify, Attribute, AttributeScores};
pub use config::{ScorerConfig, ScorerMode, DEFAULT_API_KEY_ENV};
pub use lexicon::{score_lexicon, Lexicon, LexiconEntry, LexiconScorer};
pub use remote::{cache_key, CacheRecord, RateLimiter, RemoteScorer, ScoreCache};

use crate::error::Result;

/// Anything that maps text to attribute scores. Implementations must be
/// callable from several worker threads at once.
pub trait Scorer: Send + Sync {
    fn score(&self, text: &str) -> Result<AttributeScores>;
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, text: &str) -> Result<AttributeScores> {
        (**self).score(text)
    }
}

impl<S: Scorer + ?Sized> Scorer for std::sync::Arc<S> {
    fn score(&self, text: &str) -> Result<AttributeScores> {
        (**self).score(text)
    }
}
