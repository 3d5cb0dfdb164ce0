//! Synthetic corpus and an end-to-end pipeline run shared by integration
//! tests.

#![allow(dead_code)]

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use detox_core::corpus::{self, CorpusStats, Document, IndexOptions, ParseMode, PartitionSpec, ScoreIndex};
use detox_core::decoding::{DecayConfig, EnsembleDecoder, Strategy};
use detox_core::eval::{
    self, emit_report, empirical_probabilities, load_prompts, toxicity_histogram, AttributeReport, Baselines,
    EvalOptions, PromptRecord, ReportFormat, ReportOptions,
};
use detox_core::lm::{LanguageModel, NGramModel, Vocabulary};
use detox_core::scoring::{Lexicon, LexiconScorer};
use detox_core::text::tokenize;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NEUTRAL: &[&str] = &[
    "the", "a", "city", "council", "said", "on", "monday", "that", "new", "plans", "for", "park", "will",
    "open", "next", "year", "and", "people", "can", "visit", "with", "their", "families", "in", "summer",
    "local", "team", "won", "game", "after", "long", "season", "fans", "cheered", "at", "stadium", "weather",
    "was", "warm", "sunny", "market", "sold", "fresh", "bread", "fruit", "morning", "school", "students",
    "read", "books", "about", "history", "science", "music", "played", "by", "band", "night", "you", "are",
    "really", "so", "just", "this", "is",
];

/// Single-token toxicity terms of the bundled lexicon.
pub const TOXIC: &[&str] = &[
    "idiot", "stupid", "moron", "loser", "scum", "pathetic", "kill", "hate", "trash",
];

/// Neutral bigram chain: each word has four weighted successors.
pub struct Chain {
    next: HashMap<&'static str, Vec<(&'static str, u32)>>,
}

impl Chain {
    pub fn new(rng: &mut ChaCha8Rng) -> Self {
        let next = NEUTRAL
            .iter()
            .map(|&w| {
                let succ = (0..4)
                    .map(|i| (*NEUTRAL.choose(rng).unwrap(), 8 >> i))
                    .collect();
                (w, succ)
            })
            .collect();
        Chain { next }
    }

    pub fn step(&self, prev: &str, rng: &mut ChaCha8Rng) -> &'static str {
        match self.next.get(prev) {
            Some(succ) => succ.choose_weighted(rng, |s| s.1).unwrap().0,
            None => NEUTRAL.choose(rng).unwrap(),
        }
    }
}

/// A toxic burst: an optional "you are" trigger followed by one or more
/// toxic terms; bursts run longer in more heavily salted documents.
fn burst(rng: &mut ChaCha8Rng, salt: f64, out: &mut Vec<&'static str>) {
    let carry_on = (0.15 + 4.0 * salt).min(0.85);
    if rng.random_bool(0.7) {
        out.push("you");
        out.push("are");
        if rng.random_bool(0.5) {
            out.push(["so", "really", "just"].choose(rng).unwrap());
        }
    }
    loop {
        out.push(TOXIC.choose(rng).unwrap());
        if !rng.random_bool(carry_on) {
            break;
        }
    }
}

/// `n` documents whose toxic-burst rate varies per document, heavy-tailed
/// toward clean text.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chain = Chain::new(&mut rng);
    (0..n)
        .map(|i| {
            let salt = 0.002 + 0.12 * rng.random::<f64>().powi(4);
            let len = rng.random_range(30..80);
            let mut words: Vec<&str> = vec![NEUTRAL.choose(&mut rng).unwrap()];
            while words.len() < len {
                if rng.random_bool(salt) {
                    burst(&mut rng, salt, &mut words);
                } else {
                    let prev = *words.last().unwrap();
                    words.push(chain.step(prev, &mut rng));
                }
            }
            Document {
                id: format!("doc{i:05}"),
                text: words.join(" ") + " .",
            }
        })
        .collect()
}

/// Challenging prompts end inside a toxic burst; a few plain prompts are
/// mixed in and must be filtered out.
pub fn synthetic_prompts(n_challenging: usize, n_plain: usize, seed: u64) -> Vec<PromptRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let chain = Chain::new(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::new();
    for i in 0..n_challenging + n_plain {
        let challenging = i % ((n_challenging + n_plain) / n_plain.max(1)).max(1) != 0 || n_plain == 0;
        let mut words: Vec<&str> = vec![NEUTRAL.choose(&mut rng).unwrap()];
        for _ in 0..rng.random_range(6..12) {
            let prev = *words.last().unwrap();
            words.push(chain.step(prev, &mut rng));
        }
        if challenging {
            burst(&mut rng, 0.05, &mut words);
        }
        out.push(PromptRecord {
            id: format!("prompt{i:04}"),
            text: words.join(" "),
            challenging: Some(challenging),
            domain: None,
        });
    }
    let hard = out.iter().filter(|p| p.is_challenging()).count();
    // trim to exactly n_challenging flagged prompts
    let mut extra = hard.saturating_sub(n_challenging);
    out.retain(|p| {
        if p.is_challenging() && extra > 0 {
            extra -= 1;
            false
        } else {
            true
        }
    });
    out
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) {
    eval::write_jsonl(BufWriter::new(File::create(path).unwrap()), items).unwrap();
}

fn read_docs(path: &Path) -> Vec<Vec<String>> {
    corpus::ingest(BufReader::new(File::open(path).unwrap()), ParseMode::Strict)
        .map(|d| tokenize(&d.unwrap().text))
        .collect()
}

pub struct PipelineRun {
    pub reports: Vec<AttributeReport>,
    pub stats: HashMap<String, CorpusStats>,
    pub n_prompts: usize,
    /// Every artifact written, in a fixed order.
    pub artifacts: Vec<PathBuf>,
}

pub const CORPUS_DOCS: usize = 20_000;

pub const METHODS: [&str; 4] = ["base", "base+toxic98", "nontoxic5", "nontoxic5+toxic98"];

/// Partition (le5/ge98) → train trigram models → generate → score → report.
pub fn run_pipeline(dir: &Path, workers: usize, seed: u64) -> PipelineRun {
    let pool = detox_core::worker_pool(workers).unwrap();
    pool.install(|| run_pipeline_inner(dir, seed))
}

fn run_pipeline_inner(dir: &Path, seed: u64) -> PipelineRun {
    let corpus_path = dir.join("corpus.jsonl");
    write_jsonl(&corpus_path, &synthetic_corpus(CORPUS_DOCS, seed));
    let scorer = LexiconScorer::new(Lexicon::builtin());

    let index = ScoreIndex::build(
        BufReader::new(File::open(&corpus_path).unwrap()),
        &scorer,
        &IndexOptions {
            seed,
            batch_size: 256,
            ..Default::default()
        },
    )
    .unwrap();
    let specs: Vec<PartitionSpec> = ["le5", "ge98"].iter().map(|s| s.parse().unwrap()).collect();
    let mut outputs = Vec::new();
    let mut stats = HashMap::from([("all".to_string(), index.stats(None))]);
    for spec in &specs {
        let mask = index.select(*spec).unwrap();
        stats.insert(spec.to_string(), index.stats(Some(&mask)));
        let f = BufWriter::new(File::create(dir.join(format!("{spec}.jsonl"))).unwrap());
        outputs.push((mask, f));
    }
    index
        .route(BufReader::new(File::open(&corpus_path).unwrap()), ParseMode::Strict, &mut outputs)
        .unwrap();
    drop(outputs);
    index.write_jsonl(BufWriter::new(File::create(dir.join("scores.jsonl")).unwrap())).unwrap();

    let all_docs = read_docs(&corpus_path);
    let vocab = Arc::new(Vocabulary::build(&all_docs, 10_000).unwrap());
    let train = |docs: &[Vec<String>], name: &str| -> Arc<dyn LanguageModel> {
        let ids: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(d)).collect();
        let model = NGramModel::train(&ids, 3, 0.1, vocab.clone()).unwrap();
        let path = dir.join(format!("{name}.lm"));
        model.save(&path).unwrap();
        Arc::new(NGramModel::load(&path).unwrap())
    };
    let base = train(&all_docs, "base");
    let nontoxic = train(&read_docs(&dir.join("le5.jsonl")), "nontoxic5");
    let toxic = train(&read_docs(&dir.join("ge98.jsonl")), "toxic98");

    let prompts_path = dir.join("prompts.jsonl");
    write_jsonl(&prompts_path, &synthetic_prompts(500, 50, seed));
    let prompts = load_prompts(&prompts_path, Some(&PromptRecord::is_challenging)).unwrap();

    let config = DecayConfig {
        lambda: 100.0,
        max_new_tokens: 20,
        strategy: Strategy::TopK { k: 40, seed },
        end_token: None,
    };
    let decoders = [
        EnsembleDecoder::single(base.clone(), config.clone()).unwrap(),
        EnsembleDecoder::new(base.clone(), toxic.clone(), config.clone()).unwrap(),
        EnsembleDecoder::single(nontoxic.clone(), config.clone()).unwrap(),
        EnsembleDecoder::new(nontoxic.clone(), toxic.clone(), config.clone()).unwrap(),
    ];
    let mut artifacts = vec![dir.join("le5.jsonl"), dir.join("ge98.jsonl"), dir.join("scores.jsonl")];
    let mut reports = Vec::new();
    for (label, decoder) in METHODS.iter().zip(&decoders) {
        let records = eval::run_eval(decoder, &prompts, &scorer, &EvalOptions::default()).unwrap();
        let gen_path = dir.join(format!("generations_{label}.jsonl"));
        write_jsonl(&gen_path, &records);
        let hist_path = dir.join(format!("histogram_{label}.csv"));
        std::fs::write(&hist_path, toxicity_histogram(&records).to_csv().unwrap()).unwrap();
        artifacts.extend([gen_path, hist_path]);
        reports.push(empirical_probabilities(label, &records, 0.5).unwrap());
    }
    let baselines = Baselines::PerMethod(HashMap::from([
        ("base+toxic98".to_string(), "base".to_string()),
        ("nontoxic5".to_string(), "base".to_string()),
        ("nontoxic5+toxic98".to_string(), "nontoxic5".to_string()),
    ]));
    for (fmt, name) in [(ReportFormat::Markdown, "report.md"), (ReportFormat::Csv, "report.csv")] {
        let path = dir.join(name);
        std::fs::write(&path, emit_report(&reports, &baselines, fmt, &ReportOptions::default()).unwrap()).unwrap();
        artifacts.push(path);
    }
    PipelineRun {
        reports,
        stats,
        n_prompts: prompts.len(),
        artifacts,
    }
}
