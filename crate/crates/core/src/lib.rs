//! Linear difficulty probing over language-model activation dumps.
//!
//! - [`activation`]: the `ACTV1` activation container and per-cell slicing.
//! - [`probe`]: ridge probes scored by k-fold Spearman correlation, swept over
//!   every `(layer, position)` cell.
//! - [`scaling`]: power-law fit of the probe-quality gap against model size.
//! - [`steering`]: steering vectors from probe weights and steered-run summaries.
//! - [`tracker`]: probe quality across RL checkpoints and the residualized
//!   probe-vs-accuracy regression.
//! - [`synth`]: planted-signal generators for all of the above.

pub mod activation;
pub mod error;
pub mod labels;
pub mod probe;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod steering;
pub mod synth;
pub mod tracker;

pub use activation::{ActivationSet, FeatureMatrix, Header};
pub use error::{Error, Result};
pub use labels::{DifficultyLabels, LabelSource};
pub use probe::{
    cross_validate, fit_ridge, grid_reports, spearman, sweep_grid, CvScore, ProbeGrid, ProbeWeights,
    SweepConfig,
};
pub use scaling::{fit_power_law, predict_perf, ScalingFit, ScalingPoint};
pub use steering::{
    build_steering_vector, predicted_difficulty_bins, steering_offset, summarize_runs,
    GenerationRecord, SteeringReport, SteeringVector,
};
pub use synth::{plant_checkpoint_series, plant_direction_set, plant_scaling_points, PlantSpec};
pub use tracker::{
    build_track_matrix, peak_report, relative_change, residual_slope, CheckpointSeries,
    ResidualRegressionReport, TrackMatrix,
};
