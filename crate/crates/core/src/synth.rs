//! Synthetic activation sets, scaling points and checkpoint series with planted
//! ground truth. Every generator is a pure function of its spec and seed; each
//! `(step, layer, position)` cell draws from its own derived stream.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSet;
use crate::error::{Error, Result};
use crate::labels::{DifficultyLabels, LabelSource};
use crate::rng::{self, StreamRng};
use crate::scaling::ScalingPoint;
use crate::stats::{mean, population_std};

// stream tags
const LABELS: i64 = 0;
const CELL_NOISE: i64 = 1;
const DIRECTION: i64 = 2;
const SCALING: i64 = 3;
const SERIES_DIRECTION: i64 = 10;
const SERIES_LABELS: i64 = 11;
const SERIES_NOISE: i64 = 12;
const PERMUTE: i64 = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "P")]
    pub positions: usize,
    /// `(layer id, position offset)`; layer ids run `0..L`, offsets `−1..=−P`.
    pub target_cell: (u32, i32),
    /// Signal std over noise std along the planted direction.
    pub snr: f64,
    pub seed: u64,
}

impl PlantSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d == 0 || self.layers == 0 || self.positions == 0 {
            return Err(Error::InvalidArgument("need n ≥ 2 and d, L, P ≥ 1".into()));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::InvalidArgument(format!("snr must be > 0, got {}", self.snr)));
        }
        let (l, p) = self.target_cell;
        if l as usize >= self.layers || p >= 0 || (-p) as usize > self.positions {
            return Err(Error::InvalidArgument(format!("target cell ({l}, {p}) outside the grid")));
        }
        Ok(())
    }

    pub fn layer_ids(&self) -> Vec<u32> {
        (0..self.layers as u32).collect()
    }

    pub fn position_offsets(&self) -> Vec<i32> {
        (1..=self.positions as i32).map(|p| -p).collect()
    }

    fn problem_ids(&self) -> Vec<String> {
        (0..self.n).map(|i| format!("p{i:04}")).collect()
    }
}

fn gaussian_vec(rng: &mut StreamRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let (m, s) = (mean(v), population_std(v));
    v.iter().map(|x| (x - m) / s).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Writes one cell's `[n × d]` block into the row-major `[n, L, P, d]` tensor.
fn scatter_cell(data: &mut [f32], spec_l: usize, spec_p: usize, d: usize, li: usize, pi: usize, rows: &[f64]) {
    let n = rows.len() / d;
    let per_problem = spec_l * spec_p * d;
    let offset = (li * spec_p + pi) * d;
    for i in 0..n {
        let dst = i * per_problem + offset;
        for k in 0..d {
            data[dst + k] = rows[i * d + k] as f32;
        }
    }
}

/// Labels `y ~ N(0, 1)`; at the target cell each row is `z·snr·u + ε` with `z` the
/// standardized label, `u` a random unit vector and `ε ~ N(0, I)`. Other cells are
/// pure noise.
pub fn plant_direction_set(spec: &PlantSpec) -> Result<(ActivationSet, DifficultyLabels)> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let y = gaussian_vec(&mut rng::stream(spec.seed, &[LABELS]), n);
    let z = standardize(&y);
    let u = unit(gaussian_vec(&mut rng::stream(spec.seed, &[DIRECTION]), d));

    let mut data = vec![0f32; n * spec.layers * spec.positions * d];
    for (li, &layer) in spec.layer_ids().iter().enumerate() {
        for (pi, &pos) in spec.position_offsets().iter().enumerate() {
            let mut noise = rng::stream(spec.seed, &[CELL_NOISE, i64::from(layer), i64::from(pos)]);
            let mut rows = gaussian_vec(&mut noise, n * d);
            if (layer, pos) == spec.target_cell {
                for i in 0..n {
                    for k in 0..d {
                        rows[i * d + k] += z[i] * spec.snr * u[k];
                    }
                }
            }
            scatter_cell(&mut data, spec.layers, spec.positions, d, li, pi, &rows);
        }
    }
    let ids = spec.problem_ids();
    let notes = serde_json::json!({ "generator": "plant_direction_set", "spec": spec });
    let set = ActivationSet::new("synthetic", spec.layer_ids(), spec.position_offsets(), d, ids.clone(), data)?
        .with_notes(notes);
    let labels = DifficultyLabels::new("synthetic", LabelSource::Human, ids.into_iter().zip(y))?;
    Ok((set, labels))
}

/// `perf = 1 − C·N^(−alpha)·exp(ε)`, `ε ~ N(0, noise_sigma)`.
pub fn plant_scaling_points(
    c: f64,
    alpha: f64,
    sizes: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<ScalingPoint>> {
    if c.is_nan() || c <= 0.0 {
        return Err(Error::InvalidArgument(format!("C must be > 0, got {c}")));
    }
    if noise_sigma.is_nan() || noise_sigma < 0.0 {
        return Err(Error::InvalidArgument(format!("noise sigma must be ≥ 0, got {noise_sigma}")));
    }
    let mut rng = rng::stream(seed, &[SCALING]);
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let eps = if noise_sigma == 0.0 { 0.0 } else { normal.sample(&mut rng) };
            ScalingPoint {
                model_id: format!("synthetic-{i}"),
                n_params: n,
                perf: 1.0 - c * n.powf(-alpha) * eps.exp(),
            }
        })
        .collect())
}

/// How one dataset's planted signal changes per checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub dataset_name: String,
    pub source: LabelSource,
    /// Multiplicative snr change per step.
    pub drift: f64,
    /// Drift only layers with id below this; `None` drifts every layer.
    #[serde(default)]
    pub below_layer: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointPlan {
    /// Grid shape, base snr and seed. `target_cell` is unused: every cell carries signal.
    pub base: PlantSpec,
    pub steps: usize,
    pub datasets: Vec<DriftSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub sets: Vec<(i64, ActivationSet)>,
    pub labels: Vec<DifficultyLabels>,
}

impl SyntheticSeries {
    pub fn steps(&self) -> Vec<i64> {
        self.sets.iter().map(|(s, _)| *s).collect()
    }
}

/// One activation set per step over a shared problem list. Each dataset has its
/// own labels and, per cell, its own planted direction (orthonormal across
/// datasets). At step `s` the planted snr is `base.snr · drift^s` in drifted layers
/// and `base.snr` elsewhere.
pub fn plant_checkpoint_series(plan: &CheckpointPlan) -> Result<SyntheticSeries> {
    let spec = &plan.base;
    spec.validate()?;
    if plan.steps == 0 || plan.datasets.is_empty() {
        return Err(Error::InvalidArgument("need at least one step and one dataset".into()));
    }
    if plan.datasets.len() > spec.d {
        return Err(Error::InvalidArgument("more datasets than hidden dimensions".into()));
    }
    if let Some(ds) = plan.datasets.iter().find(|ds| !(ds.drift > 0.0 && ds.drift.is_finite())) {
        return Err(Error::InvalidArgument(format!("{}: drift must be > 0", ds.dataset_name)));
    }
    let (n, d) = (spec.n, spec.d);
    let ids = spec.problem_ids();
    let mut z = Vec::with_capacity(plan.datasets.len());
    let mut labels = Vec::with_capacity(plan.datasets.len());
    for (j, ds) in plan.datasets.iter().enumerate() {
        let y = gaussian_vec(&mut rng::stream(spec.seed, &[SERIES_LABELS, j as i64]), n);
        z.push(standardize(&y));
        labels.push(DifficultyLabels::new(ds.dataset_name.clone(), ds.source, ids.iter().cloned().zip(y))?);
    }

    let cells: Vec<(usize, u32, usize, i32)> = spec
        .layer_ids()
        .into_iter()
        .enumerate()
        .flat_map(|(li, l)| spec.position_offsets().into_iter().enumerate().map(move |(pi, p)| (li, l, pi, p)))
        .collect();
    let directions: Vec<Vec<Vec<f64>>> = cells
        .iter()
        .map(|&(_, l, _, p)| {
            let mut rng = rng::stream(spec.seed, &[SERIES_DIRECTION, i64::from(l), i64::from(p)]);
            orthonormal(&mut rng, plan.datasets.len(), d)
        })
        .collect();

    let mut sets = Vec::with_capacity(plan.steps);
    for s in 0..plan.steps {
        let mut data = vec![0f32; n * spec.layers * spec.positions * d];
        for (c, &(li, l, pi, p)) in cells.iter().enumerate() {
            let mut noise = rng::stream(spec.seed, &[SERIES_NOISE, s as i64, i64::from(l), i64::from(p)]);
            let mut rows = gaussian_vec(&mut noise, n * d);
            for (j, ds) in plan.datasets.iter().enumerate() {
                let drifted = ds.below_layer.is_none_or(|cut| l < cut);
                let snr = if drifted { spec.snr * ds.drift.powi(s as i32) } else { spec.snr };
                let u = &directions[c][j];
                for i in 0..n {
                    let a = z[j][i] * snr;
                    for k in 0..d {
                        rows[i * d + k] += a * u[k];
                    }
                }
            }
            scatter_cell(&mut data, spec.layers, spec.positions, d, li, pi, &rows);
        }
        let notes = serde_json::json!({ "generator": "plant_checkpoint_series", "step": s, "plan": plan });
        let set = ActivationSet::new(
            format!("synthetic-step{s}"),
            spec.layer_ids(),
            spec.position_offsets(),
            d,
            ids.clone(),
            data,
        )?
        .with_notes(notes);
        sets.push((s as i64, set));
    }
    Ok(SyntheticSeries { sets, labels })
}

/// `count` orthonormal random vectors in `dim` dimensions (Gram–Schmidt).
fn orthonormal(rng: &mut StreamRng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian_vec(rng, dim);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Same ratings, randomly reassigned to problems.
pub fn permute_labels(labels: &DifficultyLabels, seed: u64) -> Result<DifficultyLabels> {
    let ids: Vec<String> = labels.iter().map(|(id, _)| id.to_string()).collect();
    let mut ratings: Vec<f64> = labels.iter().map(|(_, r)| r).collect();
    ratings.shuffle(&mut rng::stream(seed, &[PERMUTE]));
    DifficultyLabels::new(labels.dataset_name(), labels.source(), ids.into_iter().zip(ratings))
}
