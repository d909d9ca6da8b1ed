//! Linear difficulty probes: rank correlation, ridge fitting, k-fold scoring and
//! the (layer × position) sweep.

mod cv;
mod grid;
mod rank;
mod report;
mod ridge;

pub use cv::{cross_validate, cross_validate_detailed, fold_indices, CvDetail, CvScore};
pub use grid::{sweep_grid, CellOutcome, GridCell, ProbeGrid, SweepConfig, BestCell};
pub use rank::{mid_ranks, spearman};
pub use report::{
    grid_reports, pairwise_deltas, position_histogram, top_k, DeltaRow, GridReports,
    PositionShare, TopProbeRow,
};
pub use ridge::{fit_ridge, ProbeWeights, DEFAULT_LAMBDA};
