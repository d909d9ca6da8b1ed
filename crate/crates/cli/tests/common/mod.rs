#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diffprobe_core::steering::{write_records_jsonl, GenerationRecord};

/// The CLI binary: the cargo-provided path inside this package, otherwise the
/// copy next to the running test executable's `deps/` directory.
pub fn binary() -> PathBuf {
    if let Some(path) = option_env!("CARGO_BIN_EXE_diffprobe") {
        return PathBuf::from(path);
    }
    let exe = std::env::current_exe().unwrap();
    let dir = exe.parent().and_then(Path::parent).unwrap();
    dir.join(format!("diffprobe{}", std::env::consts::EXE_SUFFIX))
}

pub fn diffprobe(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .env("DIFFPROBE_THREADS", "2")
        .output()
        .expect("spawn diffprobe")
}

pub fn ok(args: &[&str]) -> Output {
    let out = diffprobe(args);
    assert!(
        out.status.success(),
        "diffprobe {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub const DIRECTION_SPEC: &str =
    r#"{"kind":"direction","n":80,"d":8,"L":3,"P":2,"target_cell":[1,-1],"snr":5.0,"seed":4}"#;
pub const SCALING_SPEC: &str =
    r#"{"kind":"scaling","C":2.0,"alpha":0.05,"sizes":[1e8,3e8,1e9,3e9,1e10,3e10],"noise_sigma":0.02,"seed":1}"#;
pub const CHECKPOINT_SPEC: &str = r#"{"kind":"checkpoints","steps":6,
  "base":{"n":60,"d":4,"L":3,"P":3,"target_cell":[0,-1],"snr":1.5,"seed":2},
  "datasets":[{"dataset_name":"mathx","source":"llm","drift":0.9,"below_layer":2},
              {"dataset_name":"gsm","source":"human","drift":1.0}]}"#;

fn sample_records() -> Vec<GenerationRecord> {
    let mut out = Vec::new();
    for i in 0..12 {
        for alpha in [-1.0, 0.0, 1.0] {
            let blocks = (i + alpha as i32 + 1) as usize % 3;
            out.push(GenerationRecord {
                problem_id: format!("q{i:02}"),
                alpha,
                response_text: "step\n```\ncode\n```\n".repeat(blocks),
                parsed_answer: (i % 5 != 0).then(|| i.to_string()),
                is_correct: Some((i + alpha as i32) % 2 == 0),
                response_tokens: (100 + 90 * i + 40 * alpha as i32) as u64,
                predicted_difficulty: i as f64 * 0.3 - 1.0,
            });
        }
    }
    out
}

/// Runs every subcommand once under `dir` and returns the files written plus
/// captured stdout of the commands that print.
pub fn full_pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let specs = dir.join("specs");
    fs::create_dir_all(&specs).unwrap();
    let mut produced = Vec::new();
    let write = |name: &str, text: &str| {
        let path = specs.join(name);
        fs::write(&path, text).unwrap();
        path
    };

    let direction = write("direction.json", DIRECTION_SPEC);
    let scaling = write("scaling.json", SCALING_SPEC);
    let checkpoints = write("checkpoints.json", CHECKPOINT_SPEC);
    let data = dir.join("data");
    let series = dir.join("series");
    ok(&["synth", "--spec", p(&direction), "--out-dir", p(&data)]);
    ok(&["synth", "--spec", p(&scaling), "--out-dir", p(&data)]);
    ok(&["synth", "--spec", p(&checkpoints), "--out-dir", p(&series)]);

    let actv = data.join("synthetic.actv");
    let labels = data.join("synthetic.labels.csv");
    produced.push(("inspect.stdout".into(), ok(&["inspect", p(&actv)]).stdout));

    let grid = dir.join("grid.csv");
    ok(&["probe-sweep", "--activations", p(&actv), "--labels", p(&labels), "--out", p(&grid)]);
    let weights = dir.join("grid.weights.json");

    let vector = dir.join("vector.json");
    ok(&[
        "steer-build", "--activations", p(&actv), "--weights", p(&weights), "--grid", p(&grid),
        "--dataset", "synthetic", "--out", p(&vector),
    ]);

    let records = dir.join("records.jsonl");
    let mut buf = Vec::new();
    write_records_jsonl(&sample_records(), &mut buf).unwrap();
    fs::write(&records, buf).unwrap();
    let steer = dir.join("steer");
    ok(&["steer-report", "--records", p(&records), "--out-dir", p(&steer), "--alpha-grid", "-1,0,1"]);

    let fit = dir.join("fit.json");
    let plot = dir.join("plot.csv");
    ok(&["scaling-fit", "--points", p(&data.join("points.csv")), "--out", p(&fit), "--plot", p(&plot)]);
    produced.push((
        "scaling.stdout".into(),
        ok(&["scaling-fit", "--points", p(&data.join("points.csv"))]).stdout,
    ));

    let pass1 = dir.join("pass1.csv");
    let rows: String = (0..6).map(|s| format!("{s},{}\n", 0.5 + 0.03 * s as f64 - 0.01 * (s % 2) as f64)).collect();
    fs::write(&pass1, format!("step,pass1\n{rows}")).unwrap();
    let track = dir.join("track");
    ok(&[
        "track", "--dir", p(&series), "--labels", p(&series.join("mathx.labels.csv")),
        "--labels", p(&series.join("gsm.labels.csv")), "--pass1", p(&pass1), "--out-dir", p(&track),
    ]);

    let probe = dir.join("probe.csv");
    let rows: String = (0..6).map(|s| format!("{s},{}\n", 0.8 - 0.02 * s as f64 + 0.01 * ((s * 7) % 3) as f64)).collect();
    fs::write(&probe, format!("step,score\n{rows}")).unwrap();
    let residual = dir.join("residual.json");
    ok(&["residual", "--probe", p(&probe), "--pass1", p(&pass1), "--out", p(&residual)]);

    let mut files = Vec::new();
    collect(dir, &mut files);
    files.sort();
    for f in files {
        let rel = f.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        produced.push((rel, fs::read(&f).unwrap()));
    }
    produced
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            collect(&path, out);
        } else {
            out.push(path);
        }
    }
}
