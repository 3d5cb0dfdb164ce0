use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, ValueEnum};
use detox_core::corpus::{self, CorpusStats, IndexOptions, ParseMode, PartitionSpec, ScoreIndex};
use detox_core::decoding::{DecoderFile, StrategyName};
use detox_core::eval::{
    self, emit_report, empirical_probabilities, load_prompts, score_generations, toxicity_histogram,
    Baselines, Generation, PromptRecord, ReportFormat, ReportOptions, DEFAULT_THRESHOLD,
};
use detox_core::lm::{NGramModel, TokenId, Vocabulary, DEFAULT_ORDER, DEFAULT_SMOOTHING_K};
use detox_core::scoring::{Scorer, ScorerConfig, ScorerMode};
use detox_core::text::tokenize;

use crate::{CmdResult, Failure, Settings};

const DEFAULT_SPECS: [&str; 4] = ["le2", "le5", "ge95", "ge98"];
const DEFAULT_VOCAB_SIZE: usize = 50_000;

fn require_file(path: &Path, what: &str) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} not found: {}", path.display())))
    }
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> CmdResult<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn parse_mode(lenient: bool) -> ParseMode {
    if lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    }
}

/// Keeps labels usable as file-name components.
fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "+-_.".contains(c) { c } else { '_' })
        .collect()
}

#[derive(Args, Debug)]
pub struct ScorerArgs {
    /// Lexicon TSV (attribute, term, weight); the bundled one by default.
    #[arg(long, value_name = "PATH")]
    lexicon: Option<PathBuf>,
    /// Score with a remote comment-analysis endpoint instead of a lexicon.
    /// The API key is read from PERSPECTIVE_API_KEY.
    #[arg(long, value_name = "URL", conflicts_with = "lexicon")]
    endpoint: Option<String>,
    /// JSONL cache for remote scores.
    #[arg(long, value_name = "PATH")]
    score_cache: Option<PathBuf>,
    /// Remote requests per second.
    #[arg(long)]
    rate_limit: Option<f64>,
}

impl ScorerArgs {
    fn build(&self, settings: &Settings) -> CmdResult<Box<dyn Scorer>> {
        let mut cfg = settings.file.scorer.clone().unwrap_or_default();
        if let Some(p) = &self.lexicon {
            cfg.mode = ScorerMode::Lexicon;
            cfg.lexicon = Some(p.clone());
        }
        if let Some(url) = &self.endpoint {
            cfg = ScorerConfig {
                mode: ScorerMode::Remote,
                endpoint: Some(url.clone()),
                ..cfg
            };
        }
        if let Some(p) = &self.score_cache {
            cfg.cache_path = Some(p.clone());
        }
        if let Some(r) = self.rate_limit {
            cfg.rate_limit = r;
        }
        if let (ScorerMode::Lexicon, Some(p)) = (cfg.mode, &cfg.lexicon) {
            require_file(p, "lexicon")?;
        }
        cfg.build().map_err(|e| Failure::usage(format!("scorer config: {e}")))
    }
}

// ---------------------------------------------------------------- partition

#[derive(Args, Debug)]
pub struct PartitionArgs {
    /// Corpus JSONL with `id` and `text` fields.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Partition to write, e.g. le5 or ge98. Repeatable; defaults to
    /// le2, le5, ge95 and ge98.
    #[arg(long = "spec", value_name = "SPEC")]
    specs: Vec<PartitionSpec>,
    /// Keep each document with this probability before scoring.
    #[arg(long)]
    sample_fraction: Option<f64>,
    /// Score only this many leading characters of each document.
    #[arg(long, conflicts_with = "full_text")]
    max_chars: Option<usize>,
    /// Score whole documents.
    #[arg(long)]
    full_text: bool,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    scorer: ScorerArgs,
}

pub fn partition(args: PartitionArgs, settings: &Settings) -> CmdResult {
    require_file(&args.input, "input file")?;
    let section = &settings.file.partition;
    let specs = if !args.specs.is_empty() {
        args.specs.clone()
    } else {
        let names: Vec<String> = section
            .specs
            .clone()
            .unwrap_or_else(|| DEFAULT_SPECS.iter().map(|s| s.to_string()).collect());
        names
            .iter()
            .map(|s| s.parse().map_err(Failure::usage))
            .collect::<CmdResult<_>>()?
    };
    let mut seen = HashSet::new();
    if let Some(dup) = specs.iter().find(|s| !seen.insert(**s)) {
        return Err(Failure::usage(format!("partition {dup} given twice")));
    }
    let fraction = args.sample_fraction.or(section.sample_fraction).unwrap_or(1.0);
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Failure::usage(format!("sample fraction must be in (0, 1], got {fraction}")));
    }
    let max_chars = if args.full_text {
        None
    } else {
        Some(args.max_chars.or(section.max_chars).unwrap_or(corpus::DEFAULT_MAX_SCORED_CHARS))
    };
    let scorer = args.scorer.build(settings)?;
    let mode = parse_mode(args.lenient);

    let opts = IndexOptions {
        sample_fraction: fraction,
        seed: settings.seed.unwrap_or(0),
        max_chars,
        mode,
        ..Default::default()
    };
    let index = ScoreIndex::build(open(&args.input)?, scorer.as_ref(), &opts)?;
    if index.skipped > 0 {
        log::warn!("skipped {} malformed lines", index.skipped);
    }
    if index.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("no documents to partition")));
    }
    log::info!("scored {} documents", index.len());

    let mut stats: BTreeMap<String, CorpusStats> = BTreeMap::from([("all".to_string(), index.stats(None))]);
    let mut outputs = Vec::with_capacity(specs.len());
    for spec in &specs {
        let mask = index.select(*spec)?;
        stats.insert(spec.to_string(), index.stats(Some(&mask)));
        outputs.push((mask, create(&args.out_dir.join(format!("{spec}.jsonl")))?));
    }
    index.route(open(&args.input)?, mode, &mut outputs)?;
    for (_, mut w) in outputs {
        w.flush()?;
    }

    let mut w = create(&args.out_dir.join("scores.jsonl"))?;
    index.write_jsonl(&mut w)?;
    w.flush()?;
    let mut w = create(&args.out_dir.join("stats.json"))?;
    serde_json::to_writer_pretty(&mut w, &stats).context("writing stats")?;
    w.write_all(b"\n")?;
    w.flush()?;

    println!("{:<8} {:>10} {:>12} {:>14}", "corpus", "docs", "avg_tox", "bytes");
    let order = std::iter::once("all".to_string()).chain(specs.iter().map(ToString::to_string));
    for name in order {
        let s = &stats[&name];
        println!(
            "{:<8} {:>10} {:>12.4} {:>14}",
            name, s.doc_count, s.avg_toxicity, s.total_bytes
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training corpus JSONL.
    #[arg(long)]
    corpus: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// n-gram order (default 3).
    #[arg(long)]
    order: Option<usize>,
    /// Add-k smoothing constant (default 0.1).
    #[arg(long)]
    k: Option<f64>,
    /// Maximum vocabulary size, reserved tokens included.
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Build the vocabulary from the union of these corpora. Models that
    /// will be ensembled must be trained with the same list.
    #[arg(long, value_name = "CORPUS", num_args = 1..)]
    shared_vocab: Vec<PathBuf>,
    #[arg(long)]
    lenient: bool,
}

fn read_tokenized(path: &Path, mode: ParseMode) -> CmdResult<Vec<Vec<String>>> {
    let mut docs = corpus::ingest(open(path)?, mode);
    let out = docs
        .by_ref()
        .map(|d| d.map(|d| tokenize(&d.text)))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    if docs.skipped() > 0 {
        log::warn!("{}: skipped {} malformed lines", path.display(), docs.skipped());
    }
    Ok(out)
}

pub fn train(args: TrainArgs, settings: &Settings) -> CmdResult {
    let section = &settings.file.train;
    let order = args.order.or(section.order).unwrap_or(DEFAULT_ORDER);
    let k = args.k.or(section.k).unwrap_or(DEFAULT_SMOOTHING_K);
    let vocab_size = args.vocab_size.or(section.vocab_size).unwrap_or(DEFAULT_VOCAB_SIZE);
    if order < 1 {
        return Err(Failure::usage("order must be >= 1"));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Failure::usage(format!("k must be > 0, got {k}")));
    }
    if vocab_size < 2 {
        return Err(Failure::usage("vocab size must be >= 2"));
    }
    require_file(&args.corpus, "corpus")?;
    for p in &args.shared_vocab {
        require_file(p, "vocabulary corpus")?;
    }
    let mode = parse_mode(args.lenient);

    let docs = read_tokenized(&args.corpus, mode)?;
    let vocab = if args.shared_vocab.is_empty() {
        Vocabulary::build(&docs, vocab_size)?
    } else {
        let mut union = Vec::new();
        for p in &args.shared_vocab {
            union.extend(read_tokenized(p, mode)?);
        }
        Vocabulary::build(&union, vocab_size)?
    };
    let vocab = Arc::new(vocab);
    let ids: Vec<Vec<TokenId>> = docs.iter().map(|d| vocab.encode(d)).collect();
    let model = NGramModel::train(&ids, order, k, vocab.clone())?;
    let mut w = create(&args.out)?;
    model.write_to(&mut w)?;
    w.flush()?;

    let types: HashSet<&str> = docs.iter().flatten().map(String::as_str).collect();
    println!(
        "{}: {} documents, {} tokens, {} types, vocabulary {}, {} contexts",
        args.out.display(),
        docs.len(),
        model.token_count(),
        types.len(),
        vocab.len(),
        model.contexts().count()
    );
    Ok(())
}

// ---------------------------------------------------------------- generate

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Greedy,
    TopK,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Decoder config JSON; model paths in it are relative to the file.
    #[arg(long, value_name = "PATH")]
    decoder: Option<PathBuf>,
    /// Base model (overrides the decoder config).
    #[arg(long)]
    m_org: Option<PathBuf>,
    /// Toxicity-adapted model to contrast against.
    #[arg(long)]
    m_dapt: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_new_tokens: Option<usize>,
    /// Token that ends a continuation early.
    #[arg(long)]
    end_token: Option<String>,
    /// Continuations per prompt.
    #[arg(long)]
    samples: Option<u32>,
    /// Prompt JSONL, flat `{id, text}` or nested `{prompt: {text}}`.
    #[arg(long)]
    prompts: PathBuf,
    /// Keep only prompts flagged challenging.
    #[arg(long)]
    challenging_only: bool,
    /// Generations JSONL to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn generate(args: GenerateArgs, settings: &Settings) -> CmdResult {
    let (mut file, base_dir) = match &args.decoder {
        Some(p) => {
            require_file(p, "decoder config")?;
            let file = DecoderFile::load(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            (file, p.parent().map(Path::to_path_buf))
        }
        None => {
            let m_org = args
                .m_org
                .clone()
                .ok_or_else(|| Failure::usage("either --decoder or --m-org is required"))?;
            (DecoderFile::new(m_org, None), None)
        }
    };
    if let Some(p) = &args.m_org {
        file.m_org = p.clone();
    }
    if let Some(p) = &args.m_dapt {
        file.m_dapt = Some(p.clone());
    }
    if let Some(l) = args.lambda {
        file.lambda = l;
    }
    if let Some(s) = args.strategy {
        file.strategy = match s {
            StrategyArg::Greedy => StrategyName::Greedy,
            StrategyArg::TopK => StrategyName::TopK,
        };
    }
    if let Some(k) = args.top_k {
        file.top_k = k;
    }
    if let Some(n) = args.max_new_tokens {
        file.max_new_tokens = n;
    }
    if let Some(t) = &args.end_token {
        file.end_token = Some(t.clone());
    }
    if let Some(n) = args.samples {
        file.samples_per_prompt = n;
    }
    if let Some(seed) = settings.seed {
        file.seed = seed;
    }
    file.decay_config().validate().map_err(Failure::usage)?;
    if file.samples_per_prompt == 0 {
        return Err(Failure::usage("samples must be >= 1"));
    }
    // flag paths are relative to the working directory, config paths to the config
    let resolve = |p: &Path, from_flag: bool| match &base_dir {
        Some(d) if p.is_relative() && !from_flag => d.join(p),
        _ => p.to_path_buf(),
    };
    file.m_org = resolve(&file.m_org, args.m_org.is_some());
    file.m_dapt = file.m_dapt.as_deref().map(|p| resolve(p, args.m_dapt.is_some()));
    require_file(&file.m_org, "model")?;
    if let Some(p) = &file.m_dapt {
        require_file(p, "model")?;
    }
    require_file(&args.prompts, "prompt file")?;

    let decoder = file.into_decoder(None).map_err(|e| match e {
        detox_core::Error::VocabMismatch | detox_core::Error::InvalidArgument(_) => Failure::usage(e),
        e => e.into(),
    })?;
    let challenging = |p: &PromptRecord| p.is_challenging();
    let filter: Option<&dyn Fn(&PromptRecord) -> bool> = if args.challenging_only {
        Some(&challenging)
    } else {
        None
    };
    let prompts = load_prompts(&args.prompts, filter)?;
    if prompts.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("no prompts selected")));
    }
    let gens = eval::generate_continuations(&decoder, &prompts, file.samples_per_prompt)?;
    eval::write_jsonl(create(&args.out)?, &gens)?;
    println!(
        "{}: {} generations from {} prompts ({})",
        args.out.display(),
        gens.len(),
        prompts.len(),
        if decoder.is_ensemble() { "ensemble" } else { "single model" }
    );
    Ok(())
}

// ---------------------------------------------------------------- evaluate

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("expected NAME=VALUE, got {s:?}")),
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// LABEL=GENERATIONS.jsonl; repeatable, rows keep this order.
    #[arg(long = "method", value_name = "LABEL=PATH", required = true, value_parser = parse_pair)]
    methods: Vec<(String, String)>,
    /// Compare every other method against this label.
    #[arg(long, conflicts_with = "compare")]
    baseline: Option<String>,
    /// METHOD=BASELINE; repeatable.
    #[arg(long, value_name = "METHOD=BASELINE", value_parser = parse_pair)]
    compare: Vec<(String, String)>,
    /// Attribute score at or above which a generation counts (default 0.5).
    #[arg(long)]
    threshold: Option<f64>,
    /// Decimal places of the delta annotations.
    #[arg(long, default_value_t = 1)]
    delta_decimals: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
}

pub fn evaluate(args: EvaluateArgs, settings: &Settings) -> CmdResult {
    let section = &settings.file.evaluate;
    let threshold = args.threshold.or(section.threshold).unwrap_or(DEFAULT_THRESHOLD);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::usage(format!("threshold must be in [0, 1], got {threshold}")));
    }
    let mut labels = HashSet::new();
    for (label, path) in &args.methods {
        if !labels.insert(label.as_str()) {
            return Err(Failure::usage(format!("method {label:?} given twice")));
        }
        require_file(Path::new(path), "generations file")?;
    }
    let baselines = if let Some(b) = &args.baseline {
        Baselines::Shared(b.clone())
    } else if !args.compare.is_empty() {
        Baselines::PerMethod(args.compare.iter().cloned().collect())
    } else if let Some(b) = &section.baseline {
        Baselines::Shared(b.clone())
    } else if let Some(c) = &section.compare {
        Baselines::PerMethod(c.iter().map(|(a, b)| (a.clone(), b.clone())).collect())
    } else {
        Baselines::None
    };
    let named: Vec<&String> = match &baselines {
        Baselines::None => vec![],
        Baselines::Shared(b) => vec![b],
        Baselines::PerMethod(m) => m.iter().flat_map(|(a, b)| [a, b]).collect(),
    };
    if let Some(unknown) = named.iter().find(|l| !labels.contains(l.as_str())) {
        return Err(Failure::usage(format!("unknown method label {unknown:?} in baselines")));
    }
    let scorer = args.scorer.build(settings)?;
    let opts = ReportOptions {
        delta_decimals: args.delta_decimals,
    };

    let mut reports = Vec::with_capacity(args.methods.len());
    for (label, path) in &args.methods {
        let gens: Vec<Generation> = eval::read_jsonl(open(Path::new(path))?)
            .with_context(|| format!("reading {path}"))?;
        if gens.is_empty() {
            return Err(Failure::Runtime(anyhow::anyhow!("{path}: no generations")));
        }
        let records = score_generations(gens, scorer.as_ref());
        let stem = file_stem(label);
        eval::write_jsonl(create(&args.out_dir.join(format!("scored_{stem}.jsonl")))?, &records)?;
        fs::write(
            args.out_dir.join(format!("histogram_{stem}.csv")),
            toxicity_histogram(&records).to_csv()?,
        )?;
        reports.push(empirical_probabilities(label, &records, threshold)?);
    }
    let md = emit_report(&reports, &baselines, ReportFormat::Markdown, &opts)?;
    fs::write(args.out_dir.join("report.md"), &md)?;
    fs::write(
        args.out_dir.join("report.csv"),
        emit_report(&reports, &baselines, ReportFormat::Csv, &opts)?,
    )?;
    print!("{md}");
    Ok(())
}
