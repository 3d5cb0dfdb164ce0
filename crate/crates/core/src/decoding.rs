//! Decay-function ensemble decoding.
//!
//! For every candidate token `w` the base model's probability is compared
//! against the toxicity-adapted model's:
//!
//! ```text
//! delta(w) = p_org(w | x) - p_dapt(w | x)
//! alpha(d) = 1             if d >= 0
//!          = exp(lambda*d) otherwise
//! q(w)     ∝ p_org(w | x) * alpha(delta(w))
//! ```
//!
//! Tokens the adapted model likes more than the base model are pushed down
//! exponentially; everything else keeps its base probability up to
//! renormalization. The product is evaluated in log space so that
//! `lambda = 100` cannot underflow the whole distribution.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, NGramModel, ProbDist, TokenId, Vocabulary};

pub const DEFAULT_LAMBDA: f64 = 100.0;
pub const DEFAULT_MAX_NEW_TOKENS: usize = 20;
pub const DEFAULT_TOP_K: usize = 40;

/// Below this total unnormalized mass the rescaled distribution is treated
/// as degenerate.
pub const MIN_TOTAL_MASS: f64 = 1e-300;

/// Entrywise `p_org - p_dapt`.
pub fn delta_p(p_org: &ProbDist, p_dapt: &ProbDist) -> Result<Vec<f64>> {
    if p_org.len() != p_dapt.len() {
        return Err(Error::LengthMismatch {
            left: p_org.len(),
            right: p_dapt.len(),
        });
    }
    Ok(p_org
        .probs()
        .iter()
        .zip(p_dapt.probs())
        .map(|(a, b)| a - b)
        .collect())
}

/// The decay scaling factor, in `(0, 1]`.
pub fn alpha(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        (lambda * x).exp()
    }
}

/// `p_org` reweighted by `alpha(delta_p)` and renormalized.
///
/// If no token is suppressed the base distribution is returned untouched.
/// If the suppressed mass underflows [`MIN_TOTAL_MASS`], all probability
/// goes to the token with the largest unnormalized log mass.
pub fn rescale_dist(p_org: &ProbDist, p_dapt: &ProbDist, lambda: f64) -> Result<ProbDist> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let delta = delta_p(p_org, p_dapt)?;
    if lambda == 0.0 || delta.iter().all(|&d| d >= 0.0) {
        return Ok(p_org.clone());
    }

    let log_mass: Vec<f64> = p_org
        .probs()
        .iter()
        .zip(&delta)
        .map(|(&p, &d)| p.ln() + (lambda * d).min(0.0))
        .collect();
    let max = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_mass.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let log_total = max + sum.ln();

    if !(log_total >= MIN_TOTAL_MASS.ln()) {
        let top = crate::lm::dist_argmax(&log_mass);
        log::warn!(
            "rescaled mass underflowed (log total {log_total}); falling back to token {top}"
        );
        let mut probs = vec![0.0; log_mass.len()];
        probs[top] = 1.0;
        return Ok(ProbDist::from_normalized(probs));
    }
    Ok(ProbDist::from_normalized(
        weights.into_iter().map(|w| w / sum).collect(),
    ))
}

/// How the next token is picked from the rescaled distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    /// Argmax; the lowest token id wins ties.
    Greedy,
    /// Sample among the `k` most probable tokens after renormalizing them.
    TopK { k: usize, seed: u64 },
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::TopK {
            k: DEFAULT_TOP_K,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayConfig {
    pub lambda: f64,
    pub max_new_tokens: usize,
    pub strategy: Strategy,
    /// Optional sentinel token that ends a continuation early.
    pub end_token: Option<String>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            lambda: DEFAULT_LAMBDA,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            strategy: Strategy::default(),
            end_token: None,
        }
    }
}

impl DecayConfig {
    pub fn greedy(lambda: f64) -> Self {
        DecayConfig {
            lambda,
            strategy: Strategy::Greedy,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_new_tokens < 1 {
            return Err(Error::InvalidArgument("max_new_tokens must be >= 1".into()));
        }
        if let Strategy::TopK { k, .. } = self.strategy {
            if k < 1 {
                return Err(Error::InvalidArgument("top_k must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Derives a per-generation RNG stream from a prompt id and sample index,
/// so results do not depend on which worker runs which prompt.
pub fn stream_id(prompt_id: &str, sample: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(prompt_id.as_bytes());
    h.update(sample.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A base model, optionally contrasted against a toxicity-adapted model.
#[derive(Clone)]
pub struct EnsembleDecoder {
    m_org: Arc<dyn LanguageModel>,
    m_dapt: Option<Arc<dyn LanguageModel>>,
    config: DecayConfig,
    end_id: Option<TokenId>,
}

impl std::fmt::Debug for EnsembleDecoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnsembleDecoder")
            .field("ensemble", &self.m_dapt.is_some())
            .field("vocab_size", &self.m_org.vocab().len())
            .field("config", &self.config)
            .finish()
    }
}

fn same_vocab(a: &Arc<Vocabulary>, b: &Arc<Vocabulary>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl EnsembleDecoder {
    pub fn new(
        m_org: Arc<dyn LanguageModel>,
        m_dapt: Arc<dyn LanguageModel>,
        config: DecayConfig,
    ) -> Result<Self> {
        if !same_vocab(m_org.vocab(), m_dapt.vocab()) {
            return Err(Error::VocabMismatch);
        }
        Self::build(m_org, Some(m_dapt), config)
    }

    /// Plain decoding from one model; no rescaling.
    pub fn single(model: Arc<dyn LanguageModel>, config: DecayConfig) -> Result<Self> {
        Self::build(model, None, config)
    }

    fn build(
        m_org: Arc<dyn LanguageModel>,
        m_dapt: Option<Arc<dyn LanguageModel>>,
        config: DecayConfig,
    ) -> Result<Self> {
        config.validate()?;
        let end_id = match &config.end_token {
            Some(t) => Some(m_org.vocab().id(t).ok_or_else(|| {
                Error::InvalidArgument(format!("end token {t:?} not in vocabulary"))
            })?),
            None => None,
        };
        Ok(EnsembleDecoder {
            m_org,
            m_dapt,
            config,
            end_id,
        })
    }

    pub fn config(&self) -> &DecayConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        self.m_org.vocab()
    }

    pub fn is_ensemble(&self) -> bool {
        self.m_dapt.is_some()
    }

    /// The distribution the next token is drawn from.
    pub fn step_dist(&self, context: &[TokenId]) -> Result<ProbDist> {
        let p_org = self.m_org.next_token_dist(context);
        match &self.m_dapt {
            Some(m_dapt) => rescale_dist(&p_org, &m_dapt.next_token_dist(context), self.config.lambda),
            None => Ok(p_org),
        }
    }

    /// Continuation of `prompt` using RNG stream 0.
    pub fn generate(&self, prompt: &[TokenId]) -> Result<Vec<TokenId>> {
        self.generate_stream(prompt, 0)
    }

    /// Continuation of `prompt`; `stream` selects an independent RNG stream
    /// under the configured seed (see [`stream_id`]).
    pub fn generate_stream(&self, prompt: &[TokenId], stream: u64) -> Result<Vec<TokenId>> {
        if prompt.is_empty() {
            return Err(Error::EmptyInput("prompt"));
        }
        let vocab = self.vocab();
        if let Some(&bad) = prompt.iter().find(|&&id| !vocab.contains_id(id)) {
            return Err(Error::InvalidArgument(format!("prompt token id {bad} outside vocabulary")));
        }
        let mut rng = match self.config.strategy {
            Strategy::TopK { seed, .. } => {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(stream);
                Some(r)
            }
            Strategy::Greedy => None,
        };
        let mut context = prompt.to_vec();
        let mut out = Vec::with_capacity(self.config.max_new_tokens);
        for _ in 0..self.config.max_new_tokens {
            let dist = self.step_dist(&context)?;
            let next = match (self.config.strategy, rng.as_mut()) {
                (Strategy::TopK { k, .. }, Some(rng)) => sample_top_k(&dist, k, rng),
                _ => dist.argmax(),
            } as TokenId;
            if Some(next) == self.end_id {
                break;
            }
            out.push(next);
            context.push(next);
        }
        Ok(out)
    }
}

/// Draws from the `k` most probable entries (ties by lower id), renormalized.
fn sample_top_k(dist: &ProbDist, k: usize, rng: &mut ChaCha8Rng) -> usize {
    let probs = dist.probs();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order.truncate(k.max(1));
    let total: f64 = order.iter().map(|&i| probs[i]).sum();
    if !(total > 0.0) {
        return order[0];
    }
    let mut u = rng.random::<f64>() * total;
    for &i in &order {
        u -= probs[i];
        if u < 0.0 {
            return i;
        }
    }
    // rounding left a sliver of mass; take the last positive candidate
    *order.iter().rev().find(|&&i| probs[i] > 0.0).unwrap_or(&order[0])
}

/// Loads both model files and builds an ensemble decoder over them.
pub fn make_decoder(
    m_org_path: impl AsRef<Path>,
    m_dapt_path: impl AsRef<Path>,
    config: DecayConfig,
) -> Result<EnsembleDecoder> {
    let m_org = Arc::new(NGramModel::load(m_org_path)?);
    let m_dapt = Arc::new(NGramModel::load(m_dapt_path)?);
    EnsembleDecoder::new(m_org, m_dapt, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Greedy,
    #[default]
    TopK,
}

/// Decoder config file: `{m_org, m_dapt, lambda, max_new_tokens, strategy,
/// top_k, seed}`. Without `m_dapt` the base model decodes alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderFile {
    pub m_org: PathBuf,
    #[serde(default)]
    pub m_dapt: Option<PathBuf>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: usize,
    #[serde(default)]
    pub strategy: StrategyName,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub end_token: Option<String>,
    #[serde(default = "default_samples")]
    pub samples_per_prompt: u32,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}
fn default_max_new_tokens() -> usize {
    DEFAULT_MAX_NEW_TOKENS
}
fn default_top_k() -> usize {
    DEFAULT_TOP_K
}
fn default_samples() -> u32 {
    1
}

impl DecoderFile {
    pub fn new(m_org: impl Into<PathBuf>, m_dapt: Option<PathBuf>) -> Self {
        DecoderFile {
            m_org: m_org.into(),
            m_dapt,
            lambda: DEFAULT_LAMBDA,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            strategy: StrategyName::TopK,
            top_k: DEFAULT_TOP_K,
            seed: 0,
            end_token: None,
            samples_per_prompt: 1,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn decay_config(&self) -> DecayConfig {
        DecayConfig {
            lambda: self.lambda,
            max_new_tokens: self.max_new_tokens,
            strategy: match self.strategy {
                StrategyName::Greedy => Strategy::Greedy,
                StrategyName::TopK => Strategy::TopK {
                    k: self.top_k,
                    seed: self.seed,
                },
            },
            end_token: self.end_token.clone(),
        }
    }

    /// Model paths are resolved relative to `base_dir` when relative.
    pub fn into_decoder(&self, base_dir: Option<&Path>) -> Result<EnsembleDecoder> {
        let resolve = |p: &Path| match base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        };
        let cfg = self.decay_config();
        match &self.m_dapt {
            Some(dapt) => make_decoder(resolve(&self.m_org), resolve(dapt), cfg),
            None => EnsembleDecoder::single(Arc::new(NGramModel::load(resolve(&self.m_org))?), cfg),
        }
    }
}
