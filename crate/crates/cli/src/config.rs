use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use detox_core::scoring::ScorerConfig;
use serde::Deserialize;

/// Optional JSON run config. Every field can also be given on the command
/// line, and the command line wins.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub log_level: Option<String>,
    pub scorer: Option<ScorerConfig>,
    pub partition: PartitionSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSection {
    pub specs: Option<Vec<String>>,
    pub sample_fraction: Option<f64>,
    pub max_chars: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub order: Option<usize>,
    pub k: Option<f64>,
    pub vocab_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub threshold: Option<f64>,
    pub baseline: Option<String>,
    /// method label -> baseline label
    pub compare: Option<BTreeMap<String, String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
