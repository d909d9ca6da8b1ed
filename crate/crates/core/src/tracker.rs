//! Probe quality across RL post-training checkpoints.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSet;
use crate::error::{Error, Result};
use crate::labels::DifficultyLabels;
use crate::probe::{sweep_grid, ProbeGrid, SweepConfig};
use crate::stats::{fit_line, student_t_two_sided_p};

/// Probe grids and test Pass@1 per checkpoint step.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSeries {
    steps: Vec<i64>,
    grids: BTreeMap<i64, BTreeMap<String, ProbeGrid>>,
    pass1: BTreeMap<i64, f64>,
}

impl CheckpointSeries {
    pub fn new(
        steps: Vec<i64>,
        grids: BTreeMap<i64, BTreeMap<String, ProbeGrid>>,
        pass1: BTreeMap<i64, f64>,
    ) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("no checkpoint steps".into()));
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!("steps not strictly increasing: {steps:?}")));
        }
        for s in &steps {
            if !grids.contains_key(s) {
                return Err(Error::Missing(format!("no probe grids for step {s}")));
            }
            match pass1.get(s) {
                None => return Err(Error::Missing(format!("no pass@1 for step {s}"))),
                Some(p) if !(0.0..=1.0).contains(p) => {
                    return Err(Error::InvalidArgument(format!("pass@1 {p} at step {s} outside [0, 1]")))
                }
                Some(_) => {}
            }
        }
        Ok(Self { steps, grids, pass1 })
    }

    pub fn steps(&self) -> &[i64] {
        &self.steps
    }

    pub fn grid(&self, step: i64, dataset: &str) -> Result<&ProbeGrid> {
        self.grids
            .get(&step)
            .and_then(|m| m.get(dataset))
            .ok_or_else(|| Error::Missing(format!("dataset {dataset} missing at step {step}")))
    }

    pub fn pass1_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| self.pass1[s]).collect()
    }

    /// Probe score per step: the best cell of each checkpoint, or one fixed cell.
    pub fn probe_series(&self, dataset: &str, cell: Option<(u32, i32)>) -> Result<Vec<f64>> {
        self.steps
            .iter()
            .map(|&s| {
                let g = self.grid(s, dataset)?;
                match cell {
                    None => Ok(g.best().mean_score),
                    Some((l, p)) => g.mean_score(l, p).ok_or_else(|| {
                        Error::Missing(format!("cell ({l}, {p}) has no score at step {s}"))
                    }),
                }
            })
            .collect()
    }
}

/// Sweeps every checkpoint against every label set. Checkpoints run in parallel
/// when `config.parallel` is set; the result does not depend on scheduling.
pub fn sweep_checkpoints(
    sets: &[(i64, ActivationSet)],
    labels: &[DifficultyLabels],
    pass1: BTreeMap<i64, f64>,
    config: &SweepConfig,
) -> Result<CheckpointSeries> {
    let run = |(step, set): &(i64, ActivationSet)| -> Result<(i64, BTreeMap<String, ProbeGrid>)> {
        let grids = labels
            .iter()
            .map(|l| Ok((l.dataset_name().to_string(), sweep_grid(set, l, config)?)))
            .collect::<Result<_>>()?;
        Ok((*step, grids))
    };
    let grids: Vec<(i64, BTreeMap<String, ProbeGrid>)> = if config.parallel {
        sets.par_iter().map(run).collect::<Result<_>>()?
    } else {
        sets.iter().map(run).collect::<Result<_>>()?
    };
    let steps = sets.iter().map(|(s, _)| *s).collect();
    CheckpointSeries::new(steps, grids.into_iter().collect(), pass1)
}

/// Mean scores indexed `[step × layer × position]`; failed cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackMatrix {
    pub dataset_name: String,
    pub steps: Vec<i64>,
    pub layers: Vec<u32>,
    pub positions: Vec<i32>,
    pub scores: Vec<Option<f64>>,
}

impl TrackMatrix {
    fn index(&self, s: usize, l: usize, p: usize) -> usize {
        (s * self.layers.len() + l) * self.positions.len() + p
    }

    pub fn get(&self, s: usize, l: usize, p: usize) -> Option<f64> {
        self.scores[self.index(s, l, p)]
    }

    /// `(v − v₀) / |v₀|` against the first step; cells with a zero or missing
    /// baseline come out as `None`.
    pub fn relative_change(&self) -> Vec<Option<f64>> {
        let plane = self.layers.len() * self.positions.len();
        self.scores
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let base = self.scores[i % plane]?;
                if base == 0.0 {
                    return None;
                }
                Some((v? - base) / base.abs())
            })
            .collect()
    }

    /// `step,layer,position,score,rel_change`.
    pub fn write_heatmap_csv<W: Write>(&self, writer: W) -> Result<()> {
        let rel = self.relative_change();
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "layer", "position", "score", "rel_change"])?;
        for (s, step) in self.steps.iter().enumerate() {
            for (l, layer) in self.layers.iter().enumerate() {
                for (p, pos) in self.positions.iter().enumerate() {
                    let i = self.index(s, l, p);
                    w.write_record([
                        step.to_string(),
                        layer.to_string(),
                        pos.to_string(),
                        opt(self.scores[i]),
                        opt(rel[i]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn relative_change(matrix: &TrackMatrix) -> Vec<Option<f64>> {
    matrix.relative_change()
}

pub fn build_track_matrix(
    series: &CheckpointSeries,
    dataset: &str,
    positions: &[i32],
) -> Result<TrackMatrix> {
    let first = series.grid(series.steps[0], dataset)?;
    let layers = first.layers();
    let mut scores = Vec::with_capacity(series.steps.len() * layers.len() * positions.len());
    for &step in &series.steps {
        let grid = series.grid(step, dataset)?;
        let have = grid.positions();
        if let Some(p) = positions.iter().find(|p| !have.contains(p)) {
            return Err(Error::Missing(format!("position {p} absent at step {step}")));
        }
        if grid.layers() != layers {
            return Err(Error::Missing(format!("layer set differs at step {step}")));
        }
        for &l in &layers {
            for &p in positions {
                scores.push(grid.mean_score(l, p));
            }
        }
    }
    Ok(TrackMatrix {
        dataset_name: dataset.to_string(),
        steps: series.steps.clone(),
        layers,
        positions: positions.to_vec(),
        scores,
    })
}

/// Slope of Pass@1 residuals on probe-score residuals after both are
/// residualized on training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRegressionReport {
    pub beta: f64,
    pub stderr: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub n: usize,
    /// Intercept of the residual-on-residual fit; zero up to rounding.
    pub intercept: f64,
}

impl fmt::Display for ResidualRegressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\u{3b2}={:+.2}, ", self.beta)?;
        if self.p_value < 0.001 {
            write!(f, "p<0.001")
        } else {
            write!(f, "p={:.3}", self.p_value)
        }
    }
}

pub fn residual_slope(
    probe_scores: &[f64],
    pass1: &[f64],
    steps: &[f64],
) -> Result<ResidualRegressionReport> {
    let n = steps.len();
    if probe_scores.len() != n || pass1.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{} probe scores, {} pass@1 values, {n} steps",
            probe_scores.len(),
            pass1.len()
        )));
    }
    if n < 4 {
        return Err(Error::InsufficientPoints(format!("residual regression needs n ≥ 4, got {n}")));
    }
    if probe_scores.iter().chain(pass1).chain(steps).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("residual regression input".into()));
    }
    if steps.iter().all(|&s| s == steps[0]) {
        return Err(Error::InvalidArgument("steps are constant".into()));
    }
    let x_total: f64 = {
        let m = crate::stats::mean(probe_scores);
        probe_scores.iter().map(|v| (v - m).powi(2)).sum()
    };
    let x_res = fit_line(steps, probe_scores)?.residuals;
    let y_res = fit_line(steps, pass1)?.residuals;
    let x_ss: f64 = x_res.iter().map(|v| v * v).sum();
    if x_total == 0.0 || x_ss <= 1e-20 * x_total {
        return Err(Error::NoResidualVariance);
    }
    let fit = fit_line(&x_res, &y_res)?;
    let sse: f64 = fit.residuals.iter().map(|r| r * r).sum();
    let dof = (n - 2) as f64;
    let stderr = (sse / dof / fit.sxx).sqrt();
    let t_stat = fit.slope / stderr;
    let p_value = if stderr == 0.0 { 0.0 } else { student_t_two_sided_p(t_stat, dof) };
    Ok(ResidualRegressionReport {
        beta: fit.slope,
        stderr,
        t_stat,
        p_value,
        n,
        intercept: fit.intercept,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub baseline: f64,
    pub peak: f64,
    pub peak_step: i64,
    pub last_step: i64,
}

impl fmt::Display for PeakReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1} / {:.1} / step {}", 100.0 * self.baseline, 100.0 * self.peak, self.peak_step)
    }
}

/// Baseline is the first checkpoint; ties for the peak go to the earliest step.
pub fn peak_report(series: &CheckpointSeries) -> PeakReport {
    peak_of(&series.steps, &series.pass1_series())
}

fn peak_of(steps: &[i64], pass1: &[f64]) -> PeakReport {
    let mut best = 0;
    for i in 1..pass1.len() {
        if pass1[i] > pass1[best] {
            best = i;
        }
    }
    PeakReport {
        baseline: pass1[0],
        peak: pass1[best],
        peak_step: steps[best],
        last_step: *steps.last().expect("non-empty series"),
    }
}

/// Reads a two-column `step,<value_column>` CSV.
pub fn read_step_csv<R: Read>(reader: R, value_column: &str) -> Result<BTreeMap<i64, f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != ["step", value_column] {
        return Err(Error::InvalidArgument(format!(
            "expected header step,{value_column}; got {}",
            headers.join(",")
        )));
    }
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<(i64, f64)>() {
        let (step, v) = row?;
        if out.insert(step, v).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate step {step}")));
        }
    }
    Ok(out)
}

pub fn write_step_csv<W: Write>(values: &BTreeMap<i64, f64>, value_column: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", value_column])?;
    for (s, v) in values {
        w.write_record([s.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
