use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::GenerationRecord;
use crate::error::{Error, Result};
use crate::scoring::{Attribute, AttributeScores};

pub const HISTOGRAM_BINS: usize = 20;

/// Per-attribute fraction of scored generations at or above the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub method_label: String,
    pub probabilities: [f64; Attribute::COUNT],
    /// Scored generations (the denominator).
    pub n_prompts: usize,
    /// Generations excluded because scoring failed.
    pub n_failed: usize,
}

impl AttributeReport {
    pub fn get(&self, attr: Attribute) -> f64 {
        self.probabilities[attr.index()]
    }
}

pub fn empirical_probabilities(
    method_label: &str,
    records: &[GenerationRecord],
    threshold: f64,
) -> Result<AttributeReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no generation records"));
    }
    let scored: Vec<&AttributeScores> = records.iter().filter_map(|r| r.scores.as_ref()).collect();
    let n_failed = records.len() - scored.len();
    if scored.is_empty() {
        return Err(Error::EmptyInput("every generation failed scoring"));
    }
    if n_failed > 0 {
        log::warn!(
            "{method_label}: {n_failed} failed scorings excluded, denominator {}",
            scored.len()
        );
    }
    let mut probabilities = [0.0; Attribute::COUNT];
    for a in Attribute::ALL {
        let hits = scored.iter().filter(|s| s.get(a) >= threshold).count();
        probabilities[a.index()] = hits as f64 / scored.len() as f64;
    }
    Ok(AttributeReport {
        method_label: method_label.to_string(),
        probabilities,
        n_prompts: scored.len(),
        n_failed,
    })
}

/// Toxicity distribution over 20 equal-width bins on `[0, 1]`; the last bin
/// includes 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn empty() -> Self {
        Histogram {
            bin_edges: (0..=HISTOGRAM_BINS).map(|i| i as f64 / HISTOGRAM_BINS as f64).collect(),
            counts: vec![0; HISTOGRAM_BINS],
        }
    }

    /// Bin `i` covers `[edge_i, edge_{i+1})`.
    pub fn bin_of(&self, score: f64) -> usize {
        let edges = &self.bin_edges;
        let mut i = ((score * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1);
        while i > 0 && score < edges[i] {
            i -= 1;
        }
        while i + 1 < HISTOGRAM_BINS && score >= edges[i + 1] {
            i += 1;
        }
        i
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `bin_start,bin_end,count` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_start", "bin_end", "count"]).map_err(csv_err)?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([
                format!("{:.2}", self.bin_edges[i]),
                format!("{:.2}", self.bin_edges[i + 1]),
                c.to_string(),
            ])
            .map_err(csv_err)?;
        }
        into_string(w)
    }
}

/// Histogram of toxicity over successfully scored records.
pub fn toxicity_histogram(records: &[GenerationRecord]) -> Histogram {
    let mut h = Histogram::empty();
    for s in records.iter().filter_map(|r| r.scores.as_ref()) {
        let bin = h.bin_of(s.toxicity());
        h.counts[bin] += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

/// Which row each method is compared against.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Baselines {
    #[default]
    None,
    /// Every other method against this label.
    Shared(String),
    /// method label -> baseline label.
    PerMethod(HashMap<String, String>),
}

impl Baselines {
    fn for_method(&self, method: &str) -> Option<&str> {
        match self {
            Baselines::None => None,
            Baselines::Shared(b) if b == method => None,
            Baselines::Shared(b) => Some(b),
            Baselines::PerMethod(m) => m.get(method).map(String::as_str),
        }
    }

    fn labels(&self) -> Vec<&str> {
        match self {
            Baselines::None => vec![],
            Baselines::Shared(b) => vec![b],
            Baselines::PerMethod(m) => m.values().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Decimal places of the delta annotations.
    pub delta_decimals: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { delta_decimals: 1 }
    }
}

/// A percentage with three significant figures (`38.9`, `5.75`, `0.00`).
pub fn format_percent(pct: f64) -> String {
    if pct == 0.0 || !pct.is_finite() {
        return "0.00".to_string();
    }
    let mag = pct.abs().log10().floor() as i32;
    let decimals = (2 - mag).max(0) as usize;
    let s = format!("{pct:.decimals$}");
    let rounded: f64 = s.parse().unwrap_or(pct);
    if rounded.abs() >= 10f64.powi(mag + 1) && decimals > 0 {
        let d = decimals - 1;
        return format!("{pct:.d$}");
    }
    s
}

const FIXED_SCALE: u32 = 12;

/// Parses a rendered decimal into integer units of 1e-12.
fn to_fixed(s: &str) -> i128 {
    let (neg, s) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let mut v: i128 = int.parse::<i128>().unwrap_or(0) * 10i128.pow(FIXED_SCALE);
    for (i, d) in frac.chars().take(FIXED_SCALE as usize).enumerate() {
        v += d.to_digit(10).unwrap_or(0) as i128 * 10i128.pow(FIXED_SCALE - 1 - i as u32);
    }
    if neg {
        -v
    } else {
        v
    }
}

/// `|v|` in 1e-12 units rounded half-up to `decimals` places.
fn fixed_to_string(v: i128, decimals: usize) -> String {
    let decimals = decimals.min(FIXED_SCALE as usize) as u32;
    let step = 10i128.pow(FIXED_SCALE - decimals);
    let q = (v.abs() + step / 2) / step;
    let scale = 10i128.pow(decimals);
    if decimals == 0 {
        q.to_string()
    } else {
        format!("{}.{:0width$}", q / scale, q % scale, width = decimals as usize)
    }
}

/// Baseline minus method, computed on the rendered values so annotations
/// agree with the printed numbers. `↓` marks a reduction.
fn delta_annotation(base: &str, value: &str, decimals: usize) -> (String, String) {
    let d = to_fixed(base) - to_fixed(value);
    let mag = fixed_to_string(d, decimals);
    let zero = mag.chars().all(|c| c == '0' || c == '.');
    let arrow = if zero {
        ""
    } else if d > 0 {
        "↓"
    } else {
        "↑"
    };
    let signed = if zero {
        mag.clone()
    } else if d > 0 {
        format!("-{mag}")
    } else {
        format!("+{mag}")
    };
    (format!("{arrow}{mag}"), signed)
}

struct Row<'a> {
    report: &'a AttributeReport,
    baseline: Option<&'a AttributeReport>,
    values: Vec<String>,
    deltas: Option<Vec<(String, String)>>,
}

fn build_rows<'a>(
    reports: &'a [AttributeReport],
    baselines: &Baselines,
    opts: &ReportOptions,
) -> Result<Vec<Row<'a>>> {
    let by_label: HashMap<&str, &AttributeReport> =
        reports.iter().map(|r| (r.method_label.as_str(), r)).collect();
    for b in baselines.labels() {
        if !by_label.contains_key(b) {
            return Err(Error::UnknownBaseline(b.to_string()));
        }
    }
    let render = |r: &AttributeReport| -> Vec<String> {
        r.probabilities.iter().map(|p| format_percent(p * 100.0)).collect()
    };
    Ok(reports
        .iter()
        .map(|r| {
            let values = render(r);
            let baseline = baselines
                .for_method(&r.method_label)
                .map(|b| by_label[b]);
            let deltas = baseline.map(|b| {
                render(b)
                    .iter()
                    .zip(&values)
                    .map(|(bv, v)| delta_annotation(bv, v, opts.delta_decimals))
                    .collect()
            });
            Row {
                report: r,
                baseline,
                values,
                deltas,
            }
        })
        .collect())
}

/// Renders reports with attribute columns in the fixed attribute order and
/// probabilities as percentages.
pub fn emit_report(
    reports: &[AttributeReport],
    baselines: &Baselines,
    format: ReportFormat,
    opts: &ReportOptions,
) -> Result<String> {
    let rows = build_rows(reports, baselines, opts)?;
    match format {
        ReportFormat::Markdown => Ok(markdown(&rows)),
        ReportFormat::Csv => csv_report(&rows),
    }
}

fn markdown(rows: &[Row]) -> String {
    let mut out = String::new();
    out.push_str("| Method | n |");
    for a in Attribute::ALL {
        let _ = write!(out, " {} |", a.label());
    }
    out.push_str("\n|---|---:|");
    for _ in Attribute::ALL {
        out.push_str("---:|");
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "| {} | {} |", row.report.method_label, row.report.n_prompts);
        for (i, v) in row.values.iter().enumerate() {
            match &row.deltas {
                Some(d) => {
                    let _ = write!(out, " {} {v} |", d[i].0);
                }
                None => {
                    let _ = write!(out, " {v} |");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn csv_report(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "method".to_string(),
        "baseline".to_string(),
        "n_prompts".to_string(),
        "n_failed".to_string(),
    ];
    header.extend(Attribute::ALL.iter().map(|a| a.name().to_string()));
    header.extend(Attribute::ALL.iter().map(|a| format!("{}_delta", a.name())));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![
            row.report.method_label.clone(),
            row.baseline.map(|b| b.method_label.clone()).unwrap_or_default(),
            row.report.n_prompts.to_string(),
            row.report.n_failed.to_string(),
        ];
        rec.extend(row.values.iter().cloned());
        match &row.deltas {
            Some(d) => rec.extend(d.iter().map(|(_, signed)| signed.clone())),
            None => rec.extend(std::iter::repeat_n(String::new(), Attribute::COUNT)),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    into_string(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}
