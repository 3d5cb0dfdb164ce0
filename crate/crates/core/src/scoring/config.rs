use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Lexicon, LexiconScorer, RemoteScorer, Scorer};
use crate::error::{Error, Result};

/// Environment variable holding the remote scorer API key.
pub const DEFAULT_API_KEY_ENV: &str = "PERSPECTIVE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScorerMode {
    #[default]
    Lexicon,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    pub mode: ScorerMode,
    /// Lexicon file; the bundled lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub cache_path: Option<PathBuf>,
    /// Requests per second.
    pub rate_limit: f64,
    pub api_key_env: String,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            mode: ScorerMode::Lexicon,
            lexicon: None,
            endpoint: None,
            cache_path: None,
            rate_limit: 1.0,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            max_attempts: 3,
            backoff_ms: 500,
            timeout_secs: 30,
        }
    }
}

impl ScorerConfig {
    pub fn remote(endpoint: impl Into<String>) -> Self {
        ScorerConfig {
            mode: ScorerMode::Remote,
            endpoint: Some(endpoint.into()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == ScorerMode::Remote {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(Error::InvalidArgument("remote scorer requires an endpoint".into()));
            }
            if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "rate_limit must be > 0, got {}",
                    self.rate_limit
                )));
            }
            if self.max_attempts == 0 {
                return Err(Error::InvalidArgument("max_attempts must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn backoff(&self) -> Duration {
        Duration::from_millis(self.backoff_ms)
    }

    pub fn build(&self) -> Result<Box<dyn Scorer>> {
        self.validate()?;
        Ok(match self.mode {
            ScorerMode::Lexicon => {
                let lexicon = match &self.lexicon {
                    Some(p) => Lexicon::load(p)?,
                    None => Lexicon::builtin(),
                };
                Box::new(LexiconScorer::new(lexicon))
            }
            ScorerMode::Remote => {
                let api_key = std::env::var(&self.api_key_env).ok();
                Box::new(RemoteScorer::new(self, api_key)?)
            }
        })
    }
}
