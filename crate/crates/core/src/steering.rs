//! Steering vectors derived from probe weights, and summaries of steered runs.
//!
//! The offset injected at the probe's layer is `alpha · sigma · direction`, where
//! `direction` is the probe's raw-activation gradient normalized to unit length and
//! `sigma` is the spread of training activations along it. Positive `alpha` pushes
//! toward "harder".

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::activation::FeatureMatrix;
use crate::error::{Error, Result};
use crate::probe::ProbeWeights;
use crate::stats::{population_std, quantile_sorted};

pub const DEFAULT_ALPHA_GRID: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
pub const DEFAULT_BINS: usize = 3;
pub const DEFAULT_LENGTH_BIN_WIDTH: u64 = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProbe {
    pub layer: u32,
    pub position: i32,
    pub lambda: f64,
    pub dataset_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringVector {
    pub model_id: String,
    pub layer: u32,
    pub sigma: f64,
    pub direction: Vec<f64>,
    pub source_probe: SourceProbe,
}

/// Turns a fitted probe into a unit steering direction with its projection scale.
/// `x` must be the slice the probe was trained on.
pub fn build_steering_vector(
    probe: &ProbeWeights,
    x: &FeatureMatrix,
    model_id: &str,
    dataset_name: &str,
) -> Result<SteeringVector> {
    if x.cols() != probe.dim() {
        return Err(Error::LengthMismatch(format!(
            "probe has {} features, training slice has {}",
            probe.dim(),
            x.cols()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("empty training slice".into()));
    }
    let raw = probe.raw_weights();
    let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::NoDirection);
    }
    let direction: Vec<f64> = raw.iter().map(|w| w / norm).collect();
    let projections: Vec<f64> = (0..x.rows())
        .map(|i| x.row(i).iter().zip(&direction).map(|(a, b)| a * b).sum())
        .collect();
    let sigma = population_std(&projections);
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Numerical("training activations have no spread along the probe direction".into()));
    }
    Ok(SteeringVector {
        model_id: model_id.to_string(),
        layer: probe.layer,
        sigma,
        direction,
        source_probe: SourceProbe {
            layer: probe.layer,
            position: probe.position,
            lambda: probe.ridge_lambda,
            dataset_name: dataset_name.to_string(),
        },
    })
}

/// Additive residual-stream offset `alpha · sigma · direction`.
pub fn steering_offset(v: &SteeringVector, alpha: f64) -> Vec<f64> {
    v.direction.iter().map(|d| alpha * (v.sigma * d)).collect()
}

/// Equal-count bins over predicted difficulty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyBins {
    /// `n_bins − 1` interior cut points; a value above `edges[i]` is past bin `i`.
    pub edges: Vec<f64>,
    pub labels: Vec<String>,
    /// Bin index per input prediction.
    pub assignment: Vec<usize>,
}

impl DifficultyBins {
    pub fn bin_of(&self, value: f64) -> usize {
        self.edges.iter().filter(|&&e| value > e).count()
    }
}

fn bin_labels(n_bins: usize) -> Vec<String> {
    if n_bins == 3 {
        vec!["easy".into(), "medium".into(), "hard".into()]
    } else {
        (0..n_bins).map(|i| format!("bin{i}")).collect()
    }
}

/// Quantile binning: edges at the `i/n_bins` sample quantiles (linear interpolation).
pub fn predicted_difficulty_bins(predictions: &[f64], n_bins: usize) -> Result<DifficultyBins> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    if predictions.len() < n_bins {
        return Err(Error::InsufficientPoints(format!(
            "{} predictions for {n_bins} bins",
            predictions.len()
        )));
    }
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFiniteInput("predicted difficulty".into()));
    }
    let mut sorted = predictions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < n_bins {
        return Err(Error::InvalidArgument(format!(
            "{} distinct predictions cannot fill {n_bins} bins",
            distinct.len()
        )));
    }
    let edges: Vec<f64> =
        (1..n_bins).map(|i| quantile_sorted(&sorted, i as f64 / n_bins as f64)).collect();
    let mut bins = DifficultyBins { edges, labels: bin_labels(n_bins), assignment: Vec::new() };
    bins.assignment = predictions.iter().map(|&p| bins.bin_of(p)).collect();
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub problem_id: String,
    pub alpha: f64,
    pub response_text: String,
    pub parsed_answer: Option<String>,
    pub is_correct: Option<bool>,
    pub response_tokens: u64,
    pub predicted_difficulty: f64,
}

impl GenerationRecord {
    /// Unparsed answers never count as correct.
    pub fn counts_correct(&self) -> bool {
        self.parsed_answer.is_some() && self.is_correct == Some(true)
    }
}

pub fn read_records_jsonl<R: BufRead>(reader: R) -> Result<Vec<GenerationRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidArgument(format!("record on line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records_jsonl<W: Write>(records: &[GenerationRecord], mut writer: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Number of fenced code blocks: every line starting with three backticks toggles
/// a fence, and each opening counts once.
pub fn count_code_blocks(text: &str) -> usize {
    let mut open = false;
    let mut count = 0;
    for line in text.lines() {
        if line.starts_with("```") {
            if !open {
                count += 1;
            }
            open = !open;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pass1Cell {
    pub alpha: f64,
    pub bin: String,
    pub n: u64,
    pub correct: u64,
    pub pass1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthBin {
    pub alpha: f64,
    pub lower: u64,
    pub upper: u64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeBlockBin {
    pub alpha: f64,
    pub blocks: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringReport {
    pub pass1_by_alpha_and_bin: Vec<Pass1Cell>,
    pub length_histograms: Vec<LengthBin>,
    pub code_block_counts: Vec<CodeBlockBin>,
}

/// Aggregates steered generations by `(alpha, difficulty bin)`.
///
/// Counts are exact integers, so record order never changes the report.
pub fn summarize_runs(
    records: &[GenerationRecord],
    bins: &DifficultyBins,
    alpha_grid: &[f64],
    length_bin_width: u64,
) -> Result<SteeringReport> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no generation records".into()));
    }
    if length_bin_width == 0 {
        return Err(Error::InvalidArgument("length bin width must be positive".into()));
    }
    let n_bins = bins.labels.len();
    let mut tallies = vec![(0u64, 0u64); alpha_grid.len() * n_bins];
    let mut lengths: Vec<BTreeMap<u64, u64>> = vec![BTreeMap::new(); alpha_grid.len()];
    let mut blocks: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); alpha_grid.len()];
    let mut max_tokens = 0;
    for r in records {
        let a = alpha_grid.iter().position(|&g| g == r.alpha).ok_or_else(|| {
            Error::InvalidArgument(format!("{}: alpha {} not in grid {alpha_grid:?}", r.problem_id, r.alpha))
        })?;
        if !r.predicted_difficulty.is_finite() {
            return Err(Error::NonFiniteInput(format!("{}: predicted difficulty", r.problem_id)));
        }
        let cell = &mut tallies[a * n_bins + bins.bin_of(r.predicted_difficulty)];
        cell.0 += 1;
        cell.1 += u64::from(r.counts_correct());
        *lengths[a].entry(r.response_tokens / length_bin_width).or_default() += 1;
        *blocks[a].entry(count_code_blocks(&r.response_text)).or_default() += 1;
        max_tokens = max_tokens.max(r.response_tokens);
    }

    let mut pass1 = Vec::with_capacity(tallies.len());
    for (a, &alpha) in alpha_grid.iter().enumerate() {
        for (b, label) in bins.labels.iter().enumerate() {
            let (n, correct) = tallies[a * n_bins + b];
            pass1.push(Pass1Cell {
                alpha,
                bin: label.clone(),
                n,
                correct,
                pass1: (n > 0).then(|| correct as f64 / n as f64),
            });
        }
    }
    let top_bucket = max_tokens / length_bin_width;
    let mut length_histograms = Vec::new();
    for (a, &alpha) in alpha_grid.iter().enumerate() {
        for bucket in 0..=top_bucket {
            length_histograms.push(LengthBin {
                alpha,
                lower: bucket * length_bin_width,
                upper: (bucket + 1) * length_bin_width,
                count: lengths[a].get(&bucket).copied().unwrap_or(0),
            });
        }
    }
    let code_block_counts = alpha_grid
        .iter()
        .zip(&blocks)
        .flat_map(|(&alpha, m)| m.iter().map(move |(&blocks, &count)| CodeBlockBin { alpha, blocks, count }))
        .collect();
    Ok(SteeringReport { pass1_by_alpha_and_bin: pass1, length_histograms, code_block_counts })
}

impl SteeringReport {
    pub fn pass1_csv(&self) -> Result<String> {
        rows_csv(&self.pass1_by_alpha_and_bin)
    }
    pub fn lengths_csv(&self) -> Result<String> {
        rows_csv(&self.length_histograms)
    }
    pub fn code_blocks_csv(&self) -> Result<String> {
        rows_csv(&self.code_block_counts)
    }
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
