//! Prompt-conditioned evaluation: generate continuations, score them, and
//! summarize as per-attribute empirical probabilities and histograms.

mod prompts;
mod report;
mod run;

pub use prompts::{load_prompts, parse_prompts, PromptRecord};
pub use report::{
    emit_report, empirical_probabilities, format_percent, toxicity_histogram, AttributeReport,
    Baselines, Histogram, ReportFormat, ReportOptions, HISTOGRAM_BINS,
};
pub use run::{
    generate_continuations, read_jsonl, run_eval, score_generations, write_jsonl, EvalOptions,
    Generation, GenerationRecord,
};

/// Default attribute threshold: a score of at least one half counts.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
