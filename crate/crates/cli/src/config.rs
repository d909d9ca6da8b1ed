use std::path::Path;

use serde::Deserialize;

use diffprobe_core::scaling::DEFAULT_EPSILON;
use diffprobe_core::steering::{DEFAULT_ALPHA_GRID, DEFAULT_BINS, DEFAULT_LENGTH_BIN_WIDTH};

/// Numeric parameters shared by the subcommands. Read from a JSON file, then
/// overridden by whatever flags were given.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub k: usize,
    pub seed: u64,
    pub lambda: f64,
    pub epsilon: f64,
    pub alpha_grid: Vec<f64>,
    pub bins: usize,
    pub positions: Option<Vec<i32>>,
    pub length_bin_width: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            lambda: 1.0,
            epsilon: DEFAULT_EPSILON,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            bins: DEFAULT_BINS,
            positions: None,
            length_bin_width: DEFAULT_LENGTH_BIN_WIDTH,
        }
    }
}

pub fn parse_config(text: &str) -> anyhow::Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text)
}
