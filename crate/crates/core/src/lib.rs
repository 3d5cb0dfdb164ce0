//! Decoding-time detoxification toolkit.
//!
//! A base language model is ensembled with a model adapted to a toxic corpus:
//! at each decoding step, tokens that the toxic model prefers over the base
//! model are exponentially down-weighted before selection. Around that core
//! sit the pieces needed to run the whole experiment end to end:
//!
//! - [`lm`]: vocabulary, add-k smoothed n-gram models, model files.
//! - [`scoring`]: eight-attribute toxicity scores, a lexicon scorer and a
//!   Perspective-style remote client with cache and rate limiting.
//! - [`corpus`]: JSONL ingest, subsampling, parallel scoring and
//!   nearest-rank percentile partitioning.
//! - [`decoding`]: the decay rescaling and the ensemble decoder.
//! - [`eval`]: prompt loading, batch generation, attribute reports and
//!   toxicity histograms.

pub mod corpus;
pub mod decoding;
pub mod error;
pub mod eval;
pub mod lm;
pub mod scoring;
pub mod text;

pub use error::{Error, Result};

/// A rayon pool with `workers` threads (0 = one per available core).
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}
