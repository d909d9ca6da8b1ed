use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::rank::spearman;
use super::ridge::fit_ridge;
use crate::activation::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng;

/// Per-fold Spearman scores and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    pub seed: u64,
}

impl CvScore {
    pub fn from_folds(fold_scores: Vec<f64>, seed: u64) -> Self {
        let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        Self { fold_scores, mean_score, seed }
    }
}

/// A cross-validation run with its fold layout and out-of-fold predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct CvDetail {
    pub score: CvScore,
    pub folds: Vec<Vec<usize>>,
    /// `predictions[i]` comes from the probe that did not see row `i`.
    pub predictions: Vec<f64>,
}

/// Shuffles `0..n` with a ChaCha8 stream seeded by `seed`, then cuts it into `k`
/// contiguous folds of `⌊n/k⌋` rows; the first `n mod k` folds take one extra.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    folds
}

pub fn cross_validate(
    x: &FeatureMatrix,
    y: &[f64],
    k: usize,
    seed: u64,
    lambda: f64,
) -> Result<CvScore> {
    cross_validate_detailed(x, y, k, seed, lambda).map(|d| d.score)
}

pub fn cross_validate_detailed(
    x: &FeatureMatrix,
    y: &[f64],
    k: usize,
    seed: u64,
    lambda: f64,
) -> Result<CvDetail> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("{n} rows but {} labels", y.len())));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if n < 2 * k {
        return Err(Error::InsufficientPoints(format!("{n} rows is fewer than 2·k = {}", 2 * k)));
    }
    let folds = fold_indices(n, k, seed);
    let mut predictions = vec![0.0; n];
    let mut fold_scores = Vec::with_capacity(k);
    for (f, held_out) in folds.iter().enumerate() {
        let (pred, score) = score_fold(x, y, held_out, lambda)
            .map_err(|e| Error::Numerical(format!("fold {}: {e}", f + 1)))?;
        for (&i, p) in held_out.iter().zip(pred) {
            predictions[i] = p;
        }
        fold_scores.push(score);
    }
    Ok(CvDetail { score: CvScore::from_folds(fold_scores, seed), folds, predictions })
}

fn score_fold(
    x: &FeatureMatrix,
    y: &[f64],
    held_out: &[usize],
    lambda: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = x.rows();
    let mut in_fold = vec![false; n];
    for &i in held_out {
        in_fold[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let probe = fit_ridge(&x.select_rows(&train), &y_train, lambda)?;
    let pred = probe.predict(&x.select_rows(held_out))?;
    let y_val: Vec<f64> = held_out.iter().map(|&i| y[i]).collect();
    let score = spearman(&pred, &y_val)?;
    Ok((pred, score))
}
