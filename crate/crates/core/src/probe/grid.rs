use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, CvScore};
use super::ridge::{fit_ridge, ProbeWeights, DEFAULT_LAMBDA};
use crate::activation::ActivationSet;
use crate::error::{Error, Result};
use crate::labels::DifficultyLabels;
use crate::rng::cell_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Evaluate cells on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { k: 5, seed: 0, lambda: DEFAULT_LAMBDA, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Scored(CvScore),
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub layer: u32,
    pub position: i32,
    pub outcome: CellOutcome,
    /// Probe refit on every row after cross-validation.
    pub weights: Option<ProbeWeights>,
}

impl GridCell {
    pub fn mean_score(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Scored(cv) => Some(cv.mean_score),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub layer: u32,
    pub position: i32,
    pub mean_score: f64,
}

impl BestCell {
    /// Higher score wins; ties go to the smaller layer, then the position nearer −1.
    fn beats(&self, other: &BestCell) -> bool {
        (self.mean_score, std::cmp::Reverse(self.layer), self.position)
            > (other.mean_score, std::cmp::Reverse(other.layer), other.position)
    }
}

/// Cross-validated probe scores for every cell of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub model_id: String,
    pub dataset_name: String,
    cells: Vec<GridCell>,
    best: BestCell,
}

impl ProbeGrid {
    /// Assembles a grid and selects its best cell. Fails if no cell has a score.
    pub fn from_cells(
        model_id: impl Into<String>,
        dataset_name: impl Into<String>,
        cells: Vec<GridCell>,
    ) -> Result<Self> {
        let best = cells
            .iter()
            .filter_map(|c| {
                c.mean_score().map(|m| BestCell { layer: c.layer, position: c.position, mean_score: m })
            })
            .fold(None, |acc: Option<BestCell>, cand| match acc {
                Some(b) if !cand.beats(&b) => Some(b),
                _ => Some(cand),
            })
            .ok_or_else(|| Error::Numerical("no cell produced a score".into()))?;
        Ok(Self { model_id: model_id.into(), dataset_name: dataset_name.into(), cells, best })
    }

    /// Fixture helper: one cell per `(layer, position, mean_score)`, fold scores all equal.
    pub fn from_scores(
        model_id: impl Into<String>,
        dataset_name: impl Into<String>,
        scores: &[(u32, i32, Option<f64>)],
    ) -> Result<Self> {
        let cells = scores
            .iter()
            .map(|&(layer, position, score)| GridCell {
                layer,
                position,
                outcome: match score {
                    Some(m) => CellOutcome::Scored(CvScore { fold_scores: vec![m; 5], mean_score: m, seed: 0 }),
                    None => CellOutcome::Failed { reason: "missing".into() },
                },
                weights: None,
            })
            .collect();
        Self::from_cells(model_id, dataset_name, cells)
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn best(&self) -> BestCell {
        self.best
    }

    pub fn cell(&self, layer: u32, position: i32) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.layer == layer && c.position == position)
    }

    pub fn mean_score(&self, layer: u32, position: i32) -> Option<f64> {
        self.cell(layer, position).and_then(GridCell::mean_score)
    }

    pub fn weights(&self, layer: u32, position: i32) -> Option<&ProbeWeights> {
        self.cell(layer, position).and_then(|c| c.weights.as_ref())
    }

    /// Distinct layers in first-seen order.
    pub fn layers(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.layer) {
                out.push(c.layer);
            }
        }
        out
    }

    pub fn positions(&self) -> Vec<i32> {
        let mut out = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.position) {
                out.push(c.position);
            }
        }
        out
    }

    /// `layer,position,fold1,…,foldK,mean`; failed cells leave score fields empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let k = self
            .cells
            .iter()
            .find_map(|c| match &c.outcome {
                CellOutcome::Scored(cv) => Some(cv.fold_scores.len()),
                CellOutcome::Failed { .. } => None,
            })
            .unwrap_or(5);
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["layer".to_string(), "position".to_string()];
        header.extend((1..=k).map(|i| format!("fold{i}")));
        header.push("mean".into());
        w.write_record(&header)?;
        for c in &self.cells {
            let mut rec = vec![c.layer.to_string(), c.position.to_string()];
            match &c.outcome {
                CellOutcome::Scored(cv) => {
                    rec.extend(cv.fold_scores.iter().map(f64::to_string));
                    rec.push(cv.mean_score.to_string());
                }
                CellOutcome::Failed { .. } => rec.extend(std::iter::repeat_n(String::new(), k + 1)),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the grid CSV back (scores only; weights are not part of it).
    pub fn read_csv<R: Read>(
        model_id: impl Into<String>,
        dataset_name: impl Into<String>,
        reader: R,
    ) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let width = rdr.headers()?.len();
        if width < 4 {
            return Err(Error::InvalidArgument("grid CSV needs layer,position,folds,mean".into()));
        }
        let mut cells = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse_err = |what: &str| Error::InvalidArgument(format!("bad {what} in grid CSV"));
            let layer = rec[0].parse().map_err(|_| parse_err("layer"))?;
            let position = rec[1].parse().map_err(|_| parse_err("position"))?;
            let outcome = if rec[width - 1].is_empty() {
                CellOutcome::Failed { reason: "missing".into() }
            } else {
                let folds = (2..width - 1)
                    .map(|i| rec[i].parse::<f64>().map_err(|_| parse_err("fold score")))
                    .collect::<Result<Vec<_>>>()?;
                let mean_score = rec[width - 1].parse().map_err(|_| parse_err("mean"))?;
                CellOutcome::Scored(CvScore { fold_scores: folds, mean_score, seed: 0 })
            };
            cells.push(GridCell { layer, position, outcome, weights: None });
        }
        Self::from_cells(model_id, dataset_name, cells)
    }

    /// Per-cell weight export: `[{layer, position, lambda, bias, means, scales, weights}, …]`.
    pub fn weights_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.cells
                .iter()
                .filter_map(|c| c.weights.as_ref())
                .map(|w| serde_json::to_value(w).expect("weights serialize"))
                .collect(),
        )
    }
}

fn evaluate_cell(
    set: &ActivationSet,
    y: &[f64],
    config: &SweepConfig,
    layer: u32,
    position: i32,
) -> Result<GridCell> {
    let x = set.slice(layer, position)?;
    let seed = cell_seed(config.seed, layer, position);
    let outcome = match cross_validate(&x, y, config.k, seed, config.lambda) {
        Ok(cv) => CellOutcome::Scored(cv),
        Err(e) => CellOutcome::Failed { reason: e.to_string() },
    };
    let weights = fit_ridge(&x, y, config.lambda).ok().map(|w| w.at_cell(layer, position));
    Ok(GridCell { layer, position, outcome, weights })
}

/// Scores a probe at every `(layer, position)` cell of `set`.
///
/// Each cell's fold shuffle is seeded with `seed ⊕ hash(layer, position)`, so the
/// parallel and sequential paths produce the same grid bit for bit.
pub fn sweep_grid(
    set: &ActivationSet,
    labels: &DifficultyLabels,
    config: &SweepConfig,
) -> Result<ProbeGrid> {
    let y = labels.ratings_for(set.problem_ids())?;
    let cells = set.cells();
    let evaluated: Vec<GridCell> = if config.parallel {
        cells
            .par_iter()
            .map(|&(l, p)| evaluate_cell(set, &y, config, l, p))
            .collect::<Result<_>>()?
    } else {
        cells.iter().map(|&(l, p)| evaluate_cell(set, &y, config, l, p)).collect::<Result<_>>()?
    };
    ProbeGrid::from_cells(set.model_id(), labels.dataset_name(), evaluated)
}
