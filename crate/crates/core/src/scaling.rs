//! Power-law fit of the probe-quality gap against model size:
//! `1 − perf = C · N^(−alpha)`, fitted by OLS in log-log space.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub model_id: String,
    pub n_params: f64,
    pub perf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: f64,
    pub r2_log: f64,
    pub n_points: usize,
    pub epsilon: f64,
}

pub fn fit_power_law(points: &[ScalingPoint], epsilon: f64) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    for p in points {
        if !(p.n_params > 0.0 && p.n_params.is_finite()) {
            return Err(Error::InvalidArgument(format!("{}: n_params must be > 0", p.model_id)));
        }
        if !p.perf.is_finite() {
            return Err(Error::NonFiniteInput(format!("{}: perf", p.model_id)));
        }
    }
    if points.iter().all(|p| p.n_params == points[0].n_params) {
        return Err(Error::InsufficientPoints("need at least 2 distinct model sizes".into()));
    }
    let gaps: Vec<f64> = points.iter().map(|p| (1.0 - p.perf).max(epsilon)).collect();
    if points.iter().all(|p| 1.0 - p.perf <= epsilon) {
        return Err(Error::AllAtCeiling);
    }

    let xs: Vec<f64> = points.iter().map(|p| p.n_params.ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let line = crate::stats::fit_line(&xs, &ys)?;
    let my = crate::stats::mean(&ys);
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = line.residuals.iter().map(|r| r * r).sum();
    let r2_log = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ScalingFit {
        c: line.intercept.exp(),
        alpha: -line.slope,
        r2_log,
        n_points: points.len(),
        epsilon,
    })
}

/// `1 − C·N^(−alpha)`, never above 1.
pub fn predict_perf(fit: &ScalingFit, n_params: f64) -> f64 {
    (1.0 - fit.c * n_params.powf(-fit.alpha)).min(1.0)
}

pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<ScalingPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != ["model_id", "n_params", "perf"] {
        return Err(Error::InvalidArgument(format!(
            "points header must be model_id,n_params,perf; got {}",
            headers.join(",")
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_points_csv<W: Write>(points: &[ScalingPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Plot data: observed points followed by `samples` fitted values log-spaced over
/// the observed size range. Columns `series,n_params,perf`.
pub fn write_plot_csv<W: Write>(
    points: &[ScalingPoint],
    fit: &ScalingFit,
    samples: usize,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series", "n_params", "perf"])?;
    for p in points {
        w.write_record(["observed", &p.n_params.to_string(), &p.perf.to_string()])?;
    }
    let lo = points.iter().map(|p| p.n_params).fold(f64::INFINITY, f64::min).ln();
    let hi = points.iter().map(|p| p.n_params).fold(f64::NEG_INFINITY, f64::max).ln();
    for i in 0..samples {
        let t = if samples > 1 { i as f64 / (samples - 1) as f64 } else { 0.0 };
        let n = (lo + t * (hi - lo)).exp();
        w.write_record(["fitted", &n.to_string(), &predict_perf(fit, n).to_string()])?;
    }
    w.flush()?;
    Ok(())
}
