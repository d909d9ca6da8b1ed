//! `diffprobe`: every pipeline stage as a subcommand over ACTV1 / CSV / JSON files.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 data error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "diffprobe", version, about = "Linear difficulty probes over activation dumps")]
struct Cli {
    /// JSON file with defaults for k, seed, lambda, epsilon, alpha_grid, bins, positions,
    /// length_bin_width. Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validate a ridge probe at every (layer, position) cell.
    ProbeSweep(ProbeSweepArgs),
    /// Fit 1 − perf = C·N^(−alpha) to best-probe scores.
    ScalingFit(ScalingFitArgs),
    /// Turn one cell's probe weights into a steering vector.
    SteerBuild(SteerBuildArgs),
    /// Summarize steered generations by alpha and predicted-difficulty bin.
    SteerReport(SteerReportArgs),
    /// Sweep every checkpoint and report score changes, residual slope and peak.
    Track(TrackArgs),
    /// Residualized regression of pass@1 on probe score, controlling for step.
    Residual(ResidualArgs),
    /// Generate synthetic inputs with planted ground truth.
    Synth(SynthArgs),
    /// Print the header of an ACTV1 file as JSON.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Args)]
struct SweepFlags {
    /// Number of cross-validation folds.
    #[arg(long)]
    k: Option<usize>,
    /// Seed for the fold shuffle.
    #[arg(long)]
    seed: Option<u64>,
    /// Ridge penalty (> 0).
    #[arg(long)]
    lambda: Option<f64>,
    /// Evaluate cells one at a time instead of on the worker pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct ProbeSweepArgs {
    #[arg(long)]
    activations: PathBuf,
    /// Labels CSV (`problem_id,rating,source`).
    #[arg(long)]
    labels: PathBuf,
    /// Grid CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Weights JSON output [default: <out stem>.weights.json].
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Dataset name [default: labels file name without `.labels.csv`/`.csv`].
    #[arg(long)]
    dataset: Option<String>,
    #[command(flatten)]
    sweep: SweepFlags,
}

#[derive(Debug, Args)]
struct ScalingFitArgs {
    /// Points CSV (`model_id,n_params,perf`).
    #[arg(long)]
    points: PathBuf,
    /// Fit JSON output [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot-data CSV output (observed points and fitted curve samples).
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of fitted-curve samples in the plot CSV.
    #[arg(long, default_value_t = 64)]
    samples: usize,
}

#[derive(Debug, Args)]
struct SteerBuildArgs {
    /// The activations the probe was trained on.
    #[arg(long)]
    activations: PathBuf,
    /// Weights JSON written by probe-sweep.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    layer: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    position: Option<i32>,
    /// Grid CSV; its best cell is used when --layer/--position are not given.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value = "unknown")]
    dataset: String,
    /// Steering vector JSON output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SteerReportArgs {
    /// GenerationRecord JSON-lines.
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    length_bin_width: Option<u64>,
}

#[derive(Debug, Args)]
struct TrackArgs {
    /// Directory holding `step_<k>.actv` files.
    #[arg(long)]
    dir: PathBuf,
    /// Labels CSV per dataset (repeatable).
    #[arg(long, required = true)]
    labels: Vec<PathBuf>,
    /// `step,pass1` CSV.
    #[arg(long)]
    pass1: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Positions for the heatmap [default: first three offsets].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    positions: Option<Vec<i32>>,
    /// Fixed `layer,position` cell for the residual regression instead of each
    /// checkpoint's best cell.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    cell: Option<Vec<i32>>,
    #[command(flatten)]
    sweep: SweepFlags,
}

#[derive(Debug, Args)]
struct ResidualArgs {
    /// `step,score` CSV.
    #[arg(long)]
    probe: PathBuf,
    /// `step,pass1` CSV.
    #[arg(long)]
    pass1: PathBuf,
    /// Report JSON output [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Generator spec JSON with a `kind` of `direction`, `scaling` or `checkpoints`.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct InspectArgs {
    path: PathBuf,
}

/// How a run failed, which decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("DIFFPROBE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| usage(format!("DIFFPROBE_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot size worker pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(path) => load_config(path).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::ProbeSweep(a) => commands::probe_sweep(a, cfg),
        Command::ScalingFit(a) => commands::scaling_fit(a, cfg),
        Command::SteerBuild(a) => commands::steer_build(a),
        Command::SteerReport(a) => commands::steer_report(a, cfg),
        Command::Track(a) => commands::track(a, cfg),
        Command::Residual(a) => commands::residual(a),
        Command::Synth(a) => commands::synth(a),
        Command::Inspect(a) => commands::inspect(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Data(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
