use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::activation::FeatureMatrix;
use crate::error::{Error, Result};
use crate::stats::mean;

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// A fitted ridge probe for one `(layer, position)` cell.
///
/// Predictions are `bias + Σ weights[k]·(x[k] − feature_means[k]) / feature_scales[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeWeights {
    pub layer: u32,
    pub position: i32,
    #[serde(rename = "lambda")]
    pub ridge_lambda: f64,
    pub bias: f64,
    #[serde(rename = "means")]
    pub feature_means: Vec<f64>,
    #[serde(rename = "scales")]
    pub feature_scales: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ProbeWeights {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn at_cell(mut self, layer: u32, position: i32) -> Self {
        self.layer = layer;
        self.position = position;
        self
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.bias
            + x.iter()
                .zip(&self.feature_means)
                .zip(&self.feature_scales)
                .zip(&self.weights)
                .map(|(((x, m), s), w)| w * (x - m) / s)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.dim() {
            return Err(Error::LengthMismatch(format!(
                "probe has {} features, matrix has {}",
                self.dim(),
                x.cols()
            )));
        }
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    /// Gradient of the prediction with respect to raw activations.
    pub fn raw_weights(&self) -> Vec<f64> {
        self.weights.iter().zip(&self.feature_scales).map(|(w, s)| w / s).collect()
    }
}

/// Fits standardized ridge regression with an unpenalized intercept.
///
/// Constant columns get scale 1 and weight exactly 0. Solves the primal system
/// when there are no more active features than rows, the dual otherwise.
pub fn fit_ridge(x: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<ProbeWeights> {
    let (n, d) = (x.rows(), x.cols());
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge lambda must be > 0, got {lambda}")));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 {
        return Err(Error::InsufficientPoints("ridge needs at least 2 rows".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("ridge input".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::InvalidArgument("ridge labels are constant".into()));
    }

    let mut means = vec![0.0; d];
    let mut scales = vec![1.0; d];
    let mut active = Vec::with_capacity(d);
    for k in 0..d {
        let first = x.values()[k];
        if (0..n).all(|i| x.row(i)[k] == first) {
            means[k] = first;
            continue;
        }
        let m = (0..n).map(|i| x.row(i)[k]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (x.row(i)[k] - m).powi(2)).sum::<f64>() / n as f64;
        means[k] = m;
        if var > 0.0 {
            scales[k] = var.sqrt();
            active.push(k);
        }
    }

    let y_mean = mean(y);
    let mut weights = vec![0.0; d];
    if !active.is_empty() {
        let m = active.len();
        let z = DMatrix::from_fn(n, m, |i, j| {
            let k = active[j];
            (x.row(i)[k] - means[k]) / scales[k]
        });
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let solved = if m <= n {
            let mut gram = z.tr_mul(&z);
            for j in 0..m {
                gram[(j, j)] += lambda;
            }
            let rhs = z.tr_mul(&yc);
            gram.cholesky().map(|c| c.solve(&rhs))
        } else {
            let mut kernel = &z * z.transpose();
            for i in 0..n {
                kernel[(i, i)] += lambda;
            }
            kernel.cholesky().map(|c| z.tr_mul(&c.solve(&yc)))
        }
        .ok_or_else(|| Error::Numerical("ridge system not positive definite".into()))?;
        if solved.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("ridge solution not finite".into()));
        }
        for (j, &k) in active.iter().enumerate() {
            weights[k] = solved[j];
        }
    }

    Ok(ProbeWeights {
        layer: 0,
        position: -1,
        ridge_lambda: lambda,
        bias: y_mean,
        feature_means: means,
        feature_scales: scales,
        weights,
    })
}
