//! Cross-grid summaries: top probes per dataset, where the best cells sit, and
//! base-vs-specialised model deltas.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use super::grid::ProbeGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopProbeRow {
    pub dataset_name: String,
    pub rank: usize,
    pub model_id: String,
    pub n_params: Option<f64>,
    pub mean_score: f64,
    pub layer: u32,
    pub position: i32,
}

impl fmt::Display for TopProbeRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}, layer {}, pos {}", self.mean_score, self.layer, signed(self.position))
    }
}

/// Integer with a typographic minus sign.
fn signed(v: i32) -> String {
    if v < 0 {
        format!("\u{2212}{}", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionShare {
    pub position: i32,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub dataset_name: String,
    pub base_model: String,
    pub specialised_model: String,
    pub base_score: f64,
    pub specialised_score: f64,
    pub delta: f64,
}

impl fmt::Display for DeltaRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:+.2}", self.specialised_model, self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReports {
    pub top: Vec<TopProbeRow>,
    pub positions: Vec<PositionShare>,
    pub deltas: Vec<DeltaRow>,
}

/// Best `k` grids per dataset, highest score first. Datasets in name order.
pub fn top_k(grids: &[ProbeGrid], model_sizes: &HashMap<String, f64>, k: usize) -> Vec<TopProbeRow> {
    let mut by_dataset: BTreeMap<&str, Vec<&ProbeGrid>> = BTreeMap::new();
    for g in grids {
        by_dataset.entry(g.dataset_name.as_str()).or_default().push(g);
    }
    let mut rows = Vec::new();
    for (dataset, mut gs) in by_dataset {
        gs.sort_by(|a, b| {
            b.best()
                .mean_score
                .total_cmp(&a.best().mean_score)
                .then_with(|| a.model_id.cmp(&b.model_id))
        });
        for (i, g) in gs.into_iter().take(k).enumerate() {
            let best = g.best();
            rows.push(TopProbeRow {
                dataset_name: dataset.to_string(),
                rank: i + 1,
                model_id: g.model_id.clone(),
                n_params: model_sizes.get(&g.model_id).copied(),
                mean_score: best.mean_score,
                layer: best.layer,
                position: best.position,
            });
        }
    }
    rows
}

/// Share of grids whose best cell sits at each position, nearest-to-end first.
pub fn position_histogram(grids: &[ProbeGrid]) -> Vec<PositionShare> {
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for g in grids {
        *counts.entry(g.best().position).or_default() += 1;
    }
    let total = grids.len();
    counts
        .into_iter()
        .rev()
        .map(|(position, count)| PositionShare {
            position,
            count,
            percent: 100.0 * count as f64 / total as f64,
        })
        .collect()
}

/// `best(specialised) − best(base)` for every dataset both models were probed on.
pub fn pairwise_deltas(grids: &[ProbeGrid], pairs: &[(String, String)]) -> Result<Vec<DeltaRow>> {
    let known = |m: &str| grids.iter().any(|g| g.model_id == m);
    let mut rows = Vec::new();
    for (base, spec) in pairs {
        for m in [base, spec] {
            if !known(m) {
                return Err(Error::Missing(format!("unknown model in pair: {m}")));
            }
        }
        let mut datasets: Vec<&str> = grids.iter().map(|g| g.dataset_name.as_str()).collect();
        datasets.sort_unstable();
        datasets.dedup();
        for ds in datasets {
            let find = |m: &str| grids.iter().find(|g| g.model_id == m && g.dataset_name == ds);
            if let (Some(b), Some(s)) = (find(base), find(spec)) {
                let (bs, ss) = (b.best().mean_score, s.best().mean_score);
                rows.push(DeltaRow {
                    dataset_name: ds.to_string(),
                    base_model: base.clone(),
                    specialised_model: spec.clone(),
                    base_score: bs,
                    specialised_score: ss,
                    delta: ss - bs,
                });
            }
        }
    }
    Ok(rows)
}

pub fn grid_reports(
    grids: &[ProbeGrid],
    model_sizes: &HashMap<String, f64>,
    pairs: &[(String, String)],
    k: usize,
) -> Result<GridReports> {
    if grids.is_empty() {
        return Err(Error::InvalidArgument("no grids to report on".into()));
    }
    Ok(GridReports {
        top: top_k(grids, model_sizes, k),
        positions: position_histogram(grids),
        deltas: pairwise_deltas(grids, pairs)?,
    })
}

impl GridReports {
    pub fn top_csv(&self) -> Result<String> {
        to_csv(&self.top)
    }
    pub fn positions_csv(&self) -> Result<String> {
        to_csv(&self.positions)
    }
    pub fn deltas_csv(&self) -> Result<String> {
        to_csv(&self.deltas)
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
