use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::PromptRecord;
use crate::decoding::{stream_id, EnsembleDecoder};
use crate::error::{Error, Result};
use crate::scoring::{AttributeScores, Scorer};
use crate::text::{detokenize, tokenize};

/// An unscored continuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub prompt_id: String,
    pub continuation: String,
}

/// A scored continuation. Failed scorings carry `scores: null` and the
/// error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_id: String,
    pub continuation: String,
    pub scores: Option<AttributeScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GenerationRecord {
    pub fn is_failed(&self) -> bool {
        self.scores.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub samples_per_prompt: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            samples_per_prompt: 1,
        }
    }
}

/// Generates `samples_per_prompt` continuations per prompt on the current
/// rayon pool. Output is in prompt order, then sample order; each
/// generation draws from an RNG stream keyed by prompt id and sample index.
pub fn generate_continuations(
    decoder: &EnsembleDecoder,
    prompts: &[PromptRecord],
    samples_per_prompt: u32,
) -> Result<Vec<Generation>> {
    if prompts.is_empty() {
        return Err(Error::EmptyInput("no prompts"));
    }
    if samples_per_prompt == 0 {
        return Err(Error::InvalidArgument("samples_per_prompt must be >= 1".into()));
    }
    let vocab = decoder.vocab();
    let jobs: Vec<(&PromptRecord, u32)> = prompts
        .iter()
        .flat_map(|p| (0..samples_per_prompt).map(move |s| (p, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(prompt, sample)| {
            let ids = vocab.encode(&tokenize(&prompt.text));
            let cont = decoder
                .generate_stream(&ids, stream_id(&prompt.id, sample))
                .map_err(|e| Error::InvalidArgument(format!("prompt {:?}: {e}", prompt.id)))?;
            Ok(Generation {
                prompt_id: prompt.id.clone(),
                continuation: detokenize(&vocab.decode(&cont)),
            })
        })
        .collect()
}

/// Scores each continuation; a scorer error marks that record failed
/// instead of aborting the batch.
pub fn score_generations(generations: Vec<Generation>, scorer: &dyn Scorer) -> Vec<GenerationRecord> {
    let records: Vec<GenerationRecord> = generations
        .into_par_iter()
        .map(|g| match scorer.score(&g.continuation) {
            Ok(s) => GenerationRecord {
                prompt_id: g.prompt_id,
                continuation: g.continuation,
                scores: Some(s),
                error: None,
            },
            Err(e) => GenerationRecord {
                prompt_id: g.prompt_id,
                continuation: g.continuation,
                scores: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let failed = records.iter().filter(|r| r.is_failed()).count();
    if failed > 0 {
        log::warn!("{failed} of {} generations failed scoring", records.len());
    }
    records
}

pub fn run_eval(
    decoder: &EnsembleDecoder,
    prompts: &[PromptRecord],
    scorer: &dyn Scorer,
    opts: &EvalOptions,
) -> Result<Vec<GenerationRecord>> {
    let gens = generate_continuations(decoder, prompts, opts.samples_per_prompt)?;
    Ok(score_generations(gens, scorer))
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
