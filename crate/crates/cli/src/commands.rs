use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use diffprobe_core::probe::{sweep_grid, ProbeGrid, ProbeWeights, SweepConfig};
use diffprobe_core::scaling::{fit_power_law, read_points_csv, write_plot_csv, write_points_csv};
use diffprobe_core::steering::{
    build_steering_vector, predicted_difficulty_bins, read_records_jsonl, summarize_runs,
};
use diffprobe_core::synth::{
    plant_checkpoint_series, plant_direction_set, plant_scaling_points, CheckpointPlan, PlantSpec,
};
use diffprobe_core::tracker::{
    build_track_matrix, peak_report, read_step_csv, residual_slope, sweep_checkpoints,
};
use diffprobe_core::{ActivationSet, DifficultyLabels};

use crate::config::RunConfig;
use crate::output::{write_atomic, write_json, write_text};
use crate::{
    usage, Failure, InspectArgs, ProbeSweepArgs, ResidualArgs, ScalingFitArgs, SteerBuildArgs,
    SteerReportArgs, SweepFlags, SynthArgs, TrackArgs,
};

type CmdResult = Result<(), Failure>;

impl From<diffprobe_core::Error> for Failure {
    fn from(e: diffprobe_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("input file not found: {}", path.display())))
    }
}

fn require_parent(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(usage(format!("output directory does not exist: {}", p.display())))
        }
        _ => Ok(()),
    }
}

fn ensure_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path)
        .map_err(|e| usage(format!("cannot create output directory {}: {e}", path.display())))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn load_set(path: &Path) -> Result<ActivationSet, Failure> {
    ActivationSet::read_from(open(path)?)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Data)
}

/// `amc.labels.csv` → `amc`, `amc.csv` → `amc`.
fn dataset_name(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".labels.csv")
        .or_else(|| name.strip_suffix(".csv"))
        .unwrap_or(&name)
        .to_string()
}

fn load_labels(path: &Path, dataset: Option<&str>) -> Result<DifficultyLabels, Failure> {
    let name = dataset.map_or_else(|| dataset_name(path), str::to_string);
    DifficultyLabels::read_csv(name, open(path)?)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Data)
}

fn sweep_config(flags: &SweepFlags, cfg: &RunConfig) -> SweepConfig {
    SweepConfig {
        k: flags.k.unwrap_or(cfg.k),
        seed: flags.seed.unwrap_or(cfg.seed),
        lambda: flags.lambda.unwrap_or(cfg.lambda),
        parallel: !flags.sequential,
    }
}

fn write_set(path: &Path, set: &ActivationSet) -> anyhow::Result<()> {
    write_atomic(path, |w| Ok(set.write_to(w)?))
}

fn write_labels(path: &Path, labels: &DifficultyLabels) -> anyhow::Result<()> {
    write_atomic(path, |w| Ok(labels.write_csv(w)?))
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn probe_sweep(a: ProbeSweepArgs, cfg: RunConfig) -> CmdResult {
    require_file(&a.activations)?;
    require_file(&a.labels)?;
    require_parent(&a.out)?;
    let weights_path = a.weights.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.out.with_file_name(format!("{stem}.weights.json"))
    });
    require_parent(&weights_path)?;
    let config = sweep_config(&a.sweep, &cfg);
    if config.k < 2 || config.lambda.is_nan() || config.lambda <= 0.0 {
        return Err(usage("k must be ≥ 2 and lambda > 0"));
    }

    let set = load_set(&a.activations)?;
    let labels = load_labels(&a.labels, a.dataset.as_deref())?;
    let grid = sweep_grid(&set, &labels, &config)?;
    write_atomic(&a.out, |w| Ok(grid.write_csv(w)?))?;
    write_json(&weights_path, &grid.weights_json())?;
    let best = grid.best();
    eprintln!(
        "{} on {}: best cell layer {} position {} mean {:.4}",
        grid.model_id, grid.dataset_name, best.layer, best.position, best.mean_score
    );
    Ok(())
}

pub fn scaling_fit(a: ScalingFitArgs, cfg: RunConfig) -> CmdResult {
    require_file(&a.points)?;
    for p in a.out.iter().chain(&a.plot) {
        require_parent(p)?;
    }
    let points = read_points_csv(open(&a.points)?)?;
    let fit = fit_power_law(&points, a.epsilon.unwrap_or(cfg.epsilon))?;
    match &a.out {
        Some(path) => write_json(path, &fit)?,
        None => print_json(&fit)?,
    }
    if let Some(plot) = &a.plot {
        write_atomic(plot, |w| Ok(write_plot_csv(&points, &fit, a.samples, w)?))?;
    }
    Ok(())
}

pub fn steer_build(a: SteerBuildArgs) -> CmdResult {
    require_file(&a.activations)?;
    require_file(&a.weights)?;
    if let Some(g) = &a.grid {
        require_file(g)?;
    }
    require_parent(&a.out)?;
    let all: Vec<ProbeWeights> = serde_json::from_reader(open(&a.weights)?)
        .with_context(|| format!("reading {}", a.weights.display()))?;
    let (layer, position) = match (a.layer, a.position, &a.grid) {
        (Some(l), Some(p), _) => (l, p),
        (None, None, Some(grid)) => {
            let best = ProbeGrid::read_csv("", "", open(grid)?)?.best();
            (best.layer, best.position)
        }
        (None, None, None) if all.len() == 1 => (all[0].layer, all[0].position),
        _ => return Err(usage("give --layer and --position together, or --grid to use its best cell")),
    };
    let probe = all
        .iter()
        .find(|w| w.layer == layer && w.position == position)
        .ok_or_else(|| Failure::Data(anyhow::anyhow!("no weights for cell ({layer}, {position})")))?;
    let set = load_set(&a.activations)?;
    let x = set.slice(layer, position)?;
    let vector = build_steering_vector(probe, &x, set.model_id(), &a.dataset)?;
    write_json(&a.out, &vector)?;
    Ok(())
}

#[derive(Serialize)]
struct BinsOut<'a> {
    edges: &'a [f64],
    labels: &'a [String],
    problems: BTreeMap<&'a str, &'a str>,
}

pub fn steer_report(a: SteerReportArgs, cfg: RunConfig) -> CmdResult {
    require_file(&a.records)?;
    ensure_dir(&a.out_dir)?;
    let records = read_records_jsonl(open(&a.records)?)?;
    let mut difficulty: BTreeMap<&str, f64> = BTreeMap::new();
    for r in &records {
        difficulty.entry(r.problem_id.as_str()).or_insert(r.predicted_difficulty);
    }
    let values: Vec<f64> = difficulty.values().copied().collect();
    let bins = predicted_difficulty_bins(&values, a.bins.unwrap_or(cfg.bins))?;
    let grid = a.alpha_grid.unwrap_or(cfg.alpha_grid);
    let report = summarize_runs(
        &records,
        &bins,
        &grid,
        a.length_bin_width.unwrap_or(cfg.length_bin_width),
    )?;
    write_text(&a.out_dir.join("pass1.csv"), &report.pass1_csv()?)?;
    write_text(&a.out_dir.join("lengths.csv"), &report.lengths_csv()?)?;
    write_text(&a.out_dir.join("code_blocks.csv"), &report.code_blocks_csv()?)?;
    let problems = difficulty
        .keys()
        .zip(&bins.assignment)
        .map(|(id, &b)| (*id, bins.labels[b].as_str()))
        .collect();
    let bins_out = BinsOut { edges: &bins.edges, labels: &bins.labels, problems };
    write_json(
        &a.out_dir.join("report.json"),
        &serde_json::json!({ "bins": bins_out, "report": report }),
    )?;
    Ok(())
}

/// Report JSON with its one-line rendering alongside.
#[derive(Serialize)]
struct Summarized<'a, T: Serialize> {
    #[serde(flatten)]
    report: &'a T,
    summary: String,
}

fn checkpoint_files(dir: &Path) -> Result<Vec<(i64, PathBuf)>, Failure> {
    if !dir.is_dir() {
        return Err(usage(format!("checkpoint directory not found: {}", dir.display())));
    }
    let mut found = Vec::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    for entry in entries {
        let path = entry.map_err(anyhow::Error::from)?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if let Some(step) = name.strip_prefix("step_").and_then(|r| r.strip_suffix(".actv")) {
            let step: i64 = step
                .parse()
                .map_err(|_| usage(format!("bad checkpoint file name {name}")))?;
            found.push((step, path));
        }
    }
    if found.is_empty() {
        return Err(usage(format!("no step_<k>.actv files in {}", dir.display())));
    }
    found.sort();
    Ok(found)
}

pub fn track(a: TrackArgs, cfg: RunConfig) -> CmdResult {
    let files = checkpoint_files(&a.dir)?;
    for l in &a.labels {
        require_file(l)?;
    }
    require_file(&a.pass1)?;
    let cell = match a.cell.as_deref() {
        None => None,
        Some([l, p]) if *l >= 0 => Some((*l as u32, *p)),
        Some(_) => return Err(usage("--cell takes layer,position")),
    };
    ensure_dir(&a.out_dir)?;
    let config = sweep_config(&a.sweep, &cfg);

    let sets = files
        .iter()
        .map(|(s, p)| Ok((*s, load_set(p)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let labels = a
        .labels
        .iter()
        .map(|p| load_labels(p, None))
        .collect::<Result<Vec<_>, Failure>>()?;
    let pass1 = read_step_csv(open(&a.pass1)?, "pass1")?;
    let series = sweep_checkpoints(&sets, &labels, pass1, &config)?;

    let positions = a.positions.or(cfg.positions).unwrap_or_else(|| {
        sets[0].1.position_offsets().iter().take(3).copied().collect()
    });
    let steps: Vec<f64> = series.steps().iter().map(|&s| s as f64).collect();
    for l in &labels {
        let ds = l.dataset_name();
        let matrix = build_track_matrix(&series, ds, &positions)?;
        write_atomic(&a.out_dir.join(format!("heatmap_{ds}.csv")), |w| {
            Ok(matrix.write_heatmap_csv(w)?)
        })?;
        if steps.len() < 4 {
            eprintln!("{ds}: {} checkpoints, residual regression needs 4; skipped", steps.len());
            continue;
        }
        let probe = series.probe_series(ds, cell)?;
        let report = residual_slope(&probe, &series.pass1_series(), &steps)?;
        let out = Summarized { summary: report.to_string(), report: &report };
        write_json(&a.out_dir.join(format!("residual_{ds}.json")), &out)?;
    }
    let peak = peak_report(&series);
    write_json(&a.out_dir.join("peak.json"), &Summarized { summary: peak.to_string(), report: &peak })?;
    Ok(())
}

pub fn residual(a: ResidualArgs) -> CmdResult {
    require_file(&a.probe)?;
    require_file(&a.pass1)?;
    if let Some(o) = &a.out {
        require_parent(o)?;
    }
    let probe = read_step_csv(open(&a.probe)?, "score")?;
    let pass1 = read_step_csv(open(&a.pass1)?, "pass1")?;
    if probe.keys().ne(pass1.keys()) {
        return Err(Failure::Data(anyhow::anyhow!("probe and pass1 files cover different steps")));
    }
    let steps: Vec<f64> = probe.keys().map(|&s| s as f64).collect();
    let x: Vec<f64> = probe.values().copied().collect();
    let y: Vec<f64> = pass1.values().copied().collect();
    let report = residual_slope(&x, &y, &steps)?;
    let out = Summarized { summary: report.to_string(), report: &report };
    match &a.out {
        Some(path) => write_json(path, &out)?,
        None => print_json(&out)?,
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingSynth {
    #[serde(rename = "C")]
    c: f64,
    alpha: f64,
    sizes: Vec<f64>,
    #[serde(default)]
    noise_sigma: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SynthSpec {
    Direction(PlantSpec),
    Scaling(ScalingSynth),
    Checkpoints(CheckpointPlan),
}

pub fn synth(a: SynthArgs) -> CmdResult {
    require_file(&a.spec)?;
    let text = std::fs::read_to_string(&a.spec).map_err(|e| usage(e.to_string()))?;
    let spec: SynthSpec =
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid synth spec: {e}")))?;
    ensure_dir(&a.out_dir)?;
    match spec {
        SynthSpec::Direction(s) => {
            let (set, labels) = plant_direction_set(&s)?;
            write_set(&a.out_dir.join("synthetic.actv"), &set)?;
            write_labels(&a.out_dir.join("synthetic.labels.csv"), &labels)?;
        }
        SynthSpec::Scaling(s) => {
            let points = plant_scaling_points(s.c, s.alpha, &s.sizes, s.noise_sigma, s.seed)?;
            write_atomic(&a.out_dir.join("points.csv"), |w| Ok(write_points_csv(&points, w)?))?;
        }
        SynthSpec::Checkpoints(plan) => {
            let series = plant_checkpoint_series(&plan)?;
            for (step, set) in &series.sets {
                write_set(&a.out_dir.join(format!("step_{step}.actv")), set)?;
            }
            for l in &series.labels {
                write_labels(&a.out_dir.join(format!("{}.labels.csv", l.dataset_name())), l)?;
            }
        }
    }
    Ok(())
}

pub fn inspect(a: InspectArgs) -> CmdResult {
    require_file(&a.path)?;
    let header = ActivationSet::read_header(open(&a.path)?)?;
    print_json(&header)?;
    Ok(())
}
