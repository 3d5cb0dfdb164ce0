//! Document ingest, subsampling, scoring and percentile partitioning.
//!
//! Large corpora are processed in two passes: the first streams documents
//! through the scorer and keeps only a compact [`ScoreIndex`]; the second
//! re-streams the input and routes each document to the partitions that
//! selected it. Texts are never all held in memory at once.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Lines, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scoring::{AttributeScores, Scorer};

/// Default number of leading characters sent to the scorer.
pub const DEFAULT_MAX_SCORED_CHARS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDocument {
    pub document: Document,
    pub scores: AttributeScores,
}

impl ScoredDocument {
    pub fn toxicity(&self) -> f64 {
        self.scores.toxicity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    /// Skip malformed lines, counting them.
    Lenient,
}

/// Streaming JSONL reader yielding `{id, text}` documents in input order.
pub struct Ingest<R> {
    lines: Lines<R>,
    line_no: usize,
    mode: ParseMode,
    skipped: usize,
}

pub fn ingest<R: BufRead>(reader: R, mode: ParseMode) -> Ingest<R> {
    Ingest {
        lines: reader.lines(),
        line_no: 0,
        mode,
        skipped: 0,
    }
}

impl<R> Ingest<R> {
    /// Malformed lines skipped so far (lenient mode only).
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

fn parse_document(line: &str) -> std::result::Result<Document, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = v.as_object().ok_or("expected a JSON object")?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err("field id must be a string or number".into()),
        None => return Err("missing field id".into()),
    };
    let text = match obj.get("text") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err("field text must be a string".into()),
        None => return Err("missing field text".into()),
    };
    Ok(Document { id, text })
}

impl<R: BufRead> Iterator for Ingest<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_document(&line) {
                Ok(doc) => return Some(Ok(doc)),
                Err(message) => match self.mode {
                    ParseMode::Strict => {
                        return Some(Err(Error::Parse {
                            line: self.line_no,
                            message,
                        }))
                    }
                    ParseMode::Lenient => {
                        log::debug!("line {}: skipped: {message}", self.line_no);
                        self.skipped += 1;
                    }
                },
            }
        }
    }
}

pub fn write_document<W: Write>(mut w: W, doc: &Document) -> Result<()> {
    serde_json::to_writer(&mut w, doc)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Seeded Bernoulli filter: one draw per offered item.
#[derive(Debug, Clone)]
pub struct FractionSampler {
    rng: ChaCha8Rng,
    fraction: f64,
}

impl FractionSampler {
    pub fn new(fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sample fraction must be in (0,1], got {fraction}"
            )));
        }
        Ok(FractionSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            fraction,
        })
    }

    pub fn keep(&mut self) -> bool {
        self.rng.random::<f64>() < self.fraction
    }
}

/// Keeps each item independently with probability `fraction`.
pub fn sample_fraction<I: IntoIterator>(
    docs: I,
    fraction: f64,
    seed: u64,
) -> Result<impl Iterator<Item = I::Item>> {
    let mut sampler = FractionSampler::new(fraction, seed)?;
    Ok(docs.into_iter().filter(move |_| sampler.keep()))
}

/// The leading `max_chars` characters of `text`.
pub fn scored_prefix(text: &str, max_chars: Option<usize>) -> &str {
    match max_chars.and_then(|n| text.char_indices().nth(n)) {
        Some((cut, _)) => &text[..cut],
        None => text,
    }
}

/// Scores a batch in parallel on the current rayon pool; output order
/// matches input order.
pub fn score_batch(
    docs: Vec<Document>,
    scorer: &dyn Scorer,
    max_chars: Option<usize>,
) -> Result<Vec<ScoredDocument>> {
    docs.into_par_iter()
        .map(|document| {
            let scores = scorer.score(scored_prefix(&document.text, max_chars))?;
            Ok(ScoredDocument { document, scores })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionKind {
    /// Documents at or below the percentile value.
    NontoxicLe,
    /// Documents at or above the percentile value.
    ToxicGe,
}

/// Percentile bound selecting a target corpus, written `le5`, `ge98`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartitionSpec {
    pub kind: PartitionKind,
    pub percentile: u8,
}

impl PartitionSpec {
    pub fn new(kind: PartitionKind, percentile: u8) -> Result<Self> {
        if percentile > 100 {
            return Err(Error::InvalidArgument(format!(
                "percentile must be in [0,100], got {percentile}"
            )));
        }
        Ok(PartitionSpec { kind, percentile })
    }

    pub fn le(percentile: u8) -> Result<Self> {
        Self::new(PartitionKind::NontoxicLe, percentile)
    }

    pub fn ge(percentile: u8) -> Result<Self> {
        Self::new(PartitionKind::ToxicGe, percentile)
    }

    pub fn selects(&self, score: f64, boundary: f64) -> bool {
        match self.kind {
            PartitionKind::NontoxicLe => score <= boundary,
            PartitionKind::ToxicGe => score >= boundary,
        }
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.kind {
            PartitionKind::NontoxicLe => "le",
            PartitionKind::ToxicGe => "ge",
        };
        write!(f, "{prefix}{}", self.percentile)
    }
}

impl FromStr for PartitionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("partition spec {s:?}: expected le<P> or ge<P>"));
        let (kind, rest) = if let Some(r) = s.strip_prefix("le") {
            (PartitionKind::NontoxicLe, r)
        } else if let Some(r) = s.strip_prefix("ge") {
            (PartitionKind::ToxicGe, r)
        } else {
            return Err(bad());
        };
        let p: u8 = rest.parse().map_err(|_| bad())?;
        Self::new(kind, p)
    }
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value
/// (the smallest value for `p = 0`).
pub fn percentile_value(scores: &[f64], percentile: u8) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("percentile of an empty score set"));
    }
    if percentile > 100 {
        return Err(Error::InvalidArgument(format!("percentile {percentile} > 100")));
    }
    let n = scores.len();
    let rank = (percentile as usize * n).div_ceil(100).max(1);
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[rank - 1])
}

/// Which scores the bound keeps, in input order.
pub fn select_mask(scores: &[f64], spec: PartitionSpec) -> Result<Vec<bool>> {
    let boundary = percentile_value(scores, spec.percentile)?;
    Ok(scores.iter().map(|&s| spec.selects(s, boundary)).collect())
}

/// Documents inside this toxicity percentile bound, in input order.
pub fn partition_by_percentile(
    scored: &[ScoredDocument],
    spec: PartitionSpec,
) -> Result<Vec<Document>> {
    let scores: Vec<f64> = scored.iter().map(ScoredDocument::toxicity).collect();
    let mask = select_mask(&scores, spec)?;
    Ok(scored
        .iter()
        .zip(mask)
        .filter(|(_, keep)| *keep)
        .map(|(d, _)| d.document.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: u64,
    pub avg_toxicity: f64,
    pub total_bytes: u64,
}

impl CorpusStats {
    /// Builds stats from `(toxicity, utf8_bytes)` pairs.
    pub fn from_parts<I: IntoIterator<Item = (f64, u64)>>(parts: I) -> Self {
        let mut tox = Vec::new();
        let mut total_bytes = 0u64;
        for (t, b) in parts {
            tox.push(t);
            total_bytes += b;
        }
        CorpusStats {
            doc_count: tox.len() as u64,
            avg_toxicity: mean(&tox),
            total_bytes,
        }
    }
}

/// Mean as `min + sum(x - min) / n` with a compensated sum; a set of
/// identical values averages to exactly that value.
fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &v in values {
        let x = v - lo;
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    lo + (sum + comp) / values.len() as f64
}

pub fn corpus_stats(scored: &[ScoredDocument]) -> CorpusStats {
    CorpusStats::from_parts(
        scored
            .iter()
            .map(|d| (d.toxicity(), d.document.text.len() as u64)),
    )
}

/// One scored document, without its text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// Ordinal of the document in the ingest stream, before sampling.
    #[serde(skip)]
    pub position: u64,
    pub id: String,
    pub toxicity: f64,
    #[serde(skip)]
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct IndexOptions {
    pub sample_fraction: f64,
    pub seed: u64,
    pub max_chars: Option<usize>,
    pub batch_size: usize,
    pub mode: ParseMode,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            sample_fraction: 1.0,
            seed: 0,
            max_chars: Some(DEFAULT_MAX_SCORED_CHARS),
            batch_size: 1024,
            mode: ParseMode::Strict,
        }
    }
}

/// `(id, toxicity)` for every sampled document, in input order.
#[derive(Debug, Clone, Default)]
pub struct ScoreIndex {
    pub entries: Vec<IndexEntry>,
    /// Malformed lines skipped during ingest.
    pub skipped: usize,
}

impl ScoreIndex {
    /// First pass: ingest, subsample and score in bounded batches.
    pub fn build<R: BufRead>(reader: R, scorer: &dyn Scorer, opts: &IndexOptions) -> Result<Self> {
        let mut sampler = FractionSampler::new(opts.sample_fraction, opts.seed)?;
        let batch_size = opts.batch_size.max(1);
        let mut docs = ingest(reader, opts.mode);
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        let mut batch = Vec::with_capacity(batch_size);
        let mut positions = Vec::with_capacity(batch_size);
        let mut flush = |batch: &mut Vec<Document>, positions: &mut Vec<u64>| -> Result<()> {
            let scored = score_batch(std::mem::take(batch), scorer, opts.max_chars)?;
            for (sd, pos) in scored.into_iter().zip(positions.drain(..)) {
                entries.push(IndexEntry {
                    position: pos,
                    bytes: sd.document.text.len() as u64,
                    id: sd.document.id,
                    toxicity: sd.scores.toxicity(),
                });
            }
            Ok(())
        };
        let mut position = 0u64;
        for doc in docs.by_ref() {
            let doc = doc?;
            let pos = position;
            position += 1;
            if !sampler.keep() {
                continue;
            }
            if !seen.insert(doc.id.clone()) {
                return Err(Error::InvalidArgument(format!("duplicate document id {:?}", doc.id)));
            }
            positions.push(pos);
            batch.push(doc);
            if batch.len() == batch_size {
                flush(&mut batch, &mut positions)?;
            }
        }
        if !batch.is_empty() {
            flush(&mut batch, &mut positions)?;
        }
        Ok(ScoreIndex {
            entries,
            skipped: docs.skipped(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn toxicities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.toxicity).collect()
    }

    pub fn select(&self, spec: PartitionSpec) -> Result<Vec<bool>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyInput("no scored documents to partition"));
        }
        select_mask(&self.toxicities(), spec)
    }

    pub fn stats(&self, mask: Option<&[bool]>) -> CorpusStats {
        CorpusStats::from_parts(
            self.entries
                .iter()
                .enumerate()
                .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
                .map(|(_, e)| (e.toxicity, e.bytes)),
        )
    }

    /// Writes the `{id, toxicity}` sidecar.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Second pass: re-streams the same input and writes each indexed
    /// document to every output whose mask selects it. Returns per-output
    /// document counts.
    pub fn route<R: BufRead, W: Write>(
        &self,
        reader: R,
        mode: ParseMode,
        outputs: &mut [(Vec<bool>, W)],
    ) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; outputs.len()];
        let mut next = 0usize;
        for (pos, doc) in ingest(reader, mode).enumerate() {
            let doc = doc?;
            let Some(entry) = self.entries.get(next) else {
                break;
            };
            if entry.position != pos as u64 {
                continue;
            }
            if entry.id != doc.id {
                return Err(Error::InvalidArgument(format!(
                    "input changed between passes: expected id {:?} at document {pos}, found {:?}",
                    entry.id, doc.id
                )));
            }
            for (i, (mask, w)) in outputs.iter_mut().enumerate() {
                if mask[next] {
                    write_document(&mut *w, &doc)?;
                    counts[i] += 1;
                }
            }
            next += 1;
        }
        if next != self.entries.len() {
            return Err(Error::InvalidArgument(
                "input ended before every indexed document was re-read".into(),
            ));
        }
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{Attribute, LexiconScorer};
    use proptest::prelude::*;

    fn scored(scores: &[f64]) -> Vec<ScoredDocument> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let mut v = [0.0; Attribute::COUNT];
                v[0] = s;
                ScoredDocument {
                    document: Document {
                        id: i.to_string(),
                        text: "x".repeat(i + 1),
                    },
                    scores: AttributeScores::new(v).unwrap(),
                }
            })
            .collect()
    }

    // Sort-and-slice reference: rank r = ceil(p*n/100) computed in floating
    // point, boundary = r-th smallest, compare every element.
    fn oracle(scores: &[f64], spec: PartitionSpec) -> Vec<usize> {
        let mut sorted = scores.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = ((spec.percentile as f64 / 100.0) * scores.len() as f64 - 1e-9).ceil() as usize;
        let boundary = sorted[r.max(1) - 1];
        (0..scores.len())
            .filter(|&i| match spec.kind {
                PartitionKind::NontoxicLe => scores[i] <= boundary,
                PartitionKind::ToxicGe => scores[i] >= boundary,
            })
            .collect()
    }

    #[test]
    fn ingest_two_lines() {
        let input = "{\"id\":\"a\",\"text\":\"one\"}\n\n{\"id\":\"b\",\"text\":\"two\"}\n";
        let docs: Vec<Document> = ingest(input.as_bytes(), ParseMode::Strict)
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "a");
        assert_eq!(docs[1].text, "two");
    }

    #[test]
    fn ingest_missing_text() {
        let err = ingest("{\"id\":\"a\"}\n".as_bytes(), ParseMode::Strict)
            .next()
            .unwrap()
            .unwrap_err();
        assert_eq!(err.to_string(), "line 1: missing field text");
    }

    #[test]
    fn ingest_empty_and_lenient() {
        assert_eq!(ingest("".as_bytes(), ParseMode::Strict).count(), 0);
        let input = "garbage\n{\"id\":1,\"text\":\"ok\"}\n{\"id\":2}\n";
        let mut it = ingest(input.as_bytes(), ParseMode::Lenient);
        let docs: Vec<Document> = it.by_ref().collect::<Result<_>>().unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].id, "1");
        assert_eq!(it.skipped(), 2);
    }

    #[test]
    fn sample_identity_and_determinism() {
        let all: Vec<u32> = sample_fraction(0..1000, 1.0, 7).unwrap().collect();
        assert_eq!(all.len(), 1000);
        let a: Vec<u32> = sample_fraction(0..1000, 0.3, 7).unwrap().collect();
        let b: Vec<u32> = sample_fraction(0..1000, 0.3, 7).unwrap().collect();
        assert_eq!(a, b);
        assert!(sample_fraction(0..1, 0.0, 1).is_err());
        assert!(sample_fraction(0..1, 1.5, 1).is_err());
    }

    #[test]
    fn sample_one_third_within_three_sigma() {
        let n: f64 = 30_000.0;
        let p = 1.0 / 3.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for seed in [0, 1, 42] {
            let kept = sample_fraction(0..30_000u32, p, seed).unwrap().count() as f64;
            assert!((kept - n * p).abs() <= 3.0 * sigma, "seed {seed}: kept {kept}");
        }
    }

    #[test]
    fn toxic_ge_95_of_ten() {
        let s: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let docs = scored(&s);
        let out = partition_by_percentile(&docs, PartitionSpec::ge(95).unwrap()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "9");
        assert_eq!(oracle(&s, PartitionSpec::ge(95).unwrap()), vec![9]);
    }

    #[test]
    fn boundaries_and_ties() {
        let s = [0.3, 0.1, 0.9, 0.5];
        let docs = scored(&s);
        assert_eq!(partition_by_percentile(&docs, PartitionSpec::ge(0).unwrap()).unwrap().len(), 4);
        assert_eq!(partition_by_percentile(&docs, PartitionSpec::le(100).unwrap()).unwrap().len(), 4);
        let ties = scored(&[0.4; 7]);
        for spec in ["le2", "le5", "ge95", "ge98", "ge0", "le0"] {
            let out = partition_by_percentile(&ties, spec.parse().unwrap()).unwrap();
            assert_eq!(out.len(), 7, "{spec}");
        }
    }

    #[test]
    fn preserves_input_order() {
        let docs = scored(&[0.9, 0.1, 0.95, 0.2, 0.99]);
        let ids: Vec<String> = partition_by_percentile(&docs, PartitionSpec::ge(50).unwrap())
            .unwrap()
            .into_iter()
            .map(|d| d.id)
            .collect();
        assert_eq!(ids, vec!["0", "2", "4"]);
    }

    #[test]
    fn empty_partition_input_errors() {
        assert!(partition_by_percentile(&[], PartitionSpec::ge(95).unwrap()).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("le2".parse::<PartitionSpec>().unwrap(), PartitionSpec::le(2).unwrap());
        assert_eq!("ge98".parse::<PartitionSpec>().unwrap().to_string(), "ge98");
        assert!("ge101".parse::<PartitionSpec>().is_err());
        assert!("top5".parse::<PartitionSpec>().is_err());
    }

    #[test]
    fn stats() {
        let docs = scored(&[0.2, 0.4]);
        let s = corpus_stats(&docs);
        assert_eq!(s.doc_count, 2);
        assert!((s.avg_toxicity - 0.3).abs() < 1e-15);
        assert_eq!(s.total_bytes, 3);
        assert_eq!(
            corpus_stats(&[]),
            CorpusStats {
                doc_count: 0,
                avg_toxicity: 0.0,
                total_bytes: 0
            }
        );
        assert_eq!(mean(&[0.1, 0.1, 0.1]), 0.1);
    }

    #[test]
    fn prefix_truncation() {
        assert_eq!(scored_prefix("héllo", Some(2)), "hé");
        assert_eq!(scored_prefix("hi", Some(10)), "hi");
        assert_eq!(scored_prefix("hi", None), "hi");
    }

    #[test]
    fn two_pass_index_and_route() {
        let input: String = (0..50)
            .map(|i| {
                let text = if i % 10 == 0 { "you idiot moron" } else { "a calm day" };
                format!("{{\"id\":\"d{i}\",\"text\":\"{text}\"}}\n")
            })
            .collect();
        let scorer = LexiconScorer::new(crate::scoring::Lexicon::builtin());
        let opts = IndexOptions {
            sample_fraction: 0.5,
            seed: 3,
            batch_size: 4,
            ..Default::default()
        };
        let index = ScoreIndex::build(input.as_bytes(), &scorer, &opts).unwrap();
        let again = ScoreIndex::build(input.as_bytes(), &scorer, &opts).unwrap();
        assert_eq!(index.entries, again.entries);
        let ge = index.select(PartitionSpec::ge(95).unwrap()).unwrap();
        let le = index.select(PartitionSpec::le(5).unwrap()).unwrap();
        let mut outputs = vec![(ge.clone(), Vec::new()), (le.clone(), Vec::new())];
        let counts = index.route(input.as_bytes(), ParseMode::Strict, &mut outputs).unwrap();
        assert_eq!(counts[0], ge.iter().filter(|b| **b).count() as u64);
        let toxic = String::from_utf8(outputs[0].1.clone()).unwrap();
        assert!(toxic.lines().all(|l| l.contains("idiot")));
        let clean = String::from_utf8(outputs[1].1.clone()).unwrap();
        assert!(clean.lines().all(|l| l.contains("calm")));
        let mut side = Vec::new();
        index.write_jsonl(&mut side).unwrap();
        let first = String::from_utf8(side).unwrap();
        assert!(first.starts_with("{\"id\":\"d"), "{first}");
    }

    #[test]
    fn route_detects_changed_input() {
        let a = "{\"id\":\"x\",\"text\":\"t\"}\n";
        let b = "{\"id\":\"y\",\"text\":\"t\"}\n";
        let scorer = LexiconScorer::new(crate::scoring::Lexicon::builtin());
        let index = ScoreIndex::build(a.as_bytes(), &scorer, &IndexOptions::default()).unwrap();
        let mut outputs = vec![(vec![true], Vec::<u8>::new())];
        assert!(index.route(b.as_bytes(), ParseMode::Strict, &mut outputs).is_err());
    }

    fn spec_strategy() -> impl Strategy<Value = PartitionSpec> {
        (prop::bool::ANY, 0u8..=100).prop_map(|(le, p)| {
            if le {
                PartitionSpec::le(p).unwrap()
            } else {
                PartitionSpec::ge(p).unwrap()
            }
        })
    }

    proptest! {
        #[test]
        fn matches_sort_oracle(scores in prop::collection::vec(prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 0.75, 1.0]).boxed().prop_union((0.0f64..=1.0).boxed()), 1..60),
                               spec in spec_strategy()) {
            let docs = scored(&scores);
            let got: Vec<String> = partition_by_percentile(&docs, spec).unwrap().into_iter().map(|d| d.id).collect();
            let want: Vec<String> = oracle(&scores, spec).into_iter().map(|i| i.to_string()).collect();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn disjoint_when_boundaries_separate(scores in prop::collection::vec(0.0f64..=1.0, 1..80), p in 0u8..=100, q in 0u8..=100) {
            let lo = percentile_value(&scores, p).unwrap();
            let hi = percentile_value(&scores, q).unwrap();
            prop_assume!(lo < hi);
            let a = select_mask(&scores, PartitionSpec::le(p).unwrap()).unwrap();
            let b = select_mask(&scores, PartitionSpec::ge(q).unwrap()).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(x, y)| !(*x && *y)));
        }
    }
}
