//! Python bindings: `import diffprobe`.
//!
//! Matrices cross the boundary as lists of rows (`list[list[float]]`); report
//! structs come back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::Serialize;

use diffprobe_core::probe::{self, SweepConfig};
use diffprobe_core::{scaling, steering, synth, tracker, FeatureMatrix};

create_exception!(diffprobe, DiffprobeError, PyValueError, "Invalid input or degenerate data.");

fn err(e: diffprobe_core::Error) -> PyErr {
    match e {
        diffprobe_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => DiffprobeError::new_err(other.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| DiffprobeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(&rows).map_err(err)
}

fn rows_of(m: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

#[pyclass(frozen, module = "diffprobe")]
struct ActivationSet(diffprobe_core::ActivationSet);

#[pymethods]
impl ActivationSet {
    /// `data` is the flat `[n, L, P, d]` row-major payload.
    #[new]
    fn new(
        model_id: String,
        layer_ids: Vec<u32>,
        position_offsets: Vec<i32>,
        hidden_dim: usize,
        problem_ids: Vec<String>,
        data: Vec<f32>,
    ) -> PyResult<Self> {
        diffprobe_core::ActivationSet::new(model_id, layer_ids, position_offsets, hidden_dim, problem_ids, data)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        diffprobe_core::ActivationSet::read_from(std::io::BufReader::new(file)).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        diffprobe_core::ActivationSet::read_from(data).map(Self).map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        self.0.write_to(std::io::BufWriter::new(file)).map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &self.0.to_bytes().map_err(err)?))
    }

    fn header<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.0.header())
    }

    /// Rows of the `(layer, position)` cell, one per problem.
    fn slice(&self, layer: u32, position: i32) -> PyResult<Vec<Vec<f64>>> {
        self.0.slice(layer, position).map(|m| rows_of(&m)).map_err(err)
    }

    #[getter]
    fn model_id(&self) -> &str {
        self.0.model_id()
    }
    #[getter]
    fn layer_ids(&self) -> Vec<u32> {
        self.0.layer_ids().to_vec()
    }
    #[getter]
    fn position_offsets(&self) -> Vec<i32> {
        self.0.position_offsets().to_vec()
    }
    #[getter]
    fn hidden_dim(&self) -> usize {
        self.0.hidden_dim()
    }
    #[getter]
    fn problem_ids(&self) -> Vec<String> {
        self.0.problem_ids().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.n_problems()
    }

    fn __repr__(&self) -> String {
        format!(
            "ActivationSet(model_id={:?}, n={}, L={}, P={}, d={})",
            self.0.model_id(),
            self.0.n_problems(),
            self.0.n_layers(),
            self.0.n_positions(),
            self.0.hidden_dim()
        )
    }
}

#[pyclass(frozen, module = "diffprobe")]
struct DifficultyLabels(diffprobe_core::DifficultyLabels);

#[pymethods]
impl DifficultyLabels {
    #[new]
    #[pyo3(signature = (dataset_name, ratings, source = "human"))]
    fn new(dataset_name: String, ratings: Vec<(String, f64)>, source: &str) -> PyResult<Self> {
        let source = source.parse().map_err(err)?;
        diffprobe_core::DifficultyLabels::new(dataset_name, source, ratings).map(Self).map_err(err)
    }

    #[staticmethod]
    fn read_csv(dataset_name: String, path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        diffprobe_core::DifficultyLabels::read_csv(dataset_name, file).map(Self).map_err(err)
    }

    fn ratings_for(&self, problem_ids: Vec<String>) -> PyResult<Vec<f64>> {
        self.0.ratings_for(&problem_ids).map_err(err)
    }

    #[getter]
    fn dataset_name(&self) -> &str {
        self.0.dataset_name()
    }
    #[getter]
    fn source(&self) -> String {
        self.0.source().to_string()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(frozen, module = "diffprobe")]
struct ProbeWeights(probe::ProbeWeights);

#[pymethods]
impl ProbeWeights {
    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.0.predict(&matrix(rows)?).map_err(err)
    }

    /// Weights in the original (unstandardized) feature units.
    fn raw_weights(&self) -> Vec<f64> {
        self.0.raw_weights()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.0)
    }

    #[getter]
    fn layer(&self) -> u32 {
        self.0.layer
    }
    #[getter]
    fn position(&self) -> i32 {
        self.0.position
    }
    #[getter]
    fn bias(&self) -> f64 {
        self.0.bias
    }
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.clone()
    }
}

#[pyclass(frozen, module = "diffprobe")]
struct ProbeGrid(probe::ProbeGrid);

#[pymethods]
impl ProbeGrid {
    /// `(layer, position, mean_score)` of the best cell.
    fn best(&self) -> (u32, i32, f64) {
        let b = self.0.best();
        (b.layer, b.position, b.mean_score)
    }

    fn mean_score(&self, layer: u32, position: i32) -> Option<f64> {
        self.0.mean_score(layer, position)
    }

    fn weights(&self, layer: u32, position: i32) -> Option<ProbeWeights> {
        self.0.weights(layer, position).cloned().map(ProbeWeights)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.0.write_csv(&mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(|e| DiffprobeError::new_err(e.to_string()))
    }

    #[getter]
    fn model_id(&self) -> &str {
        &self.0.model_id
    }
    #[getter]
    fn dataset_name(&self) -> &str {
        &self.0.dataset_name
    }
}

#[pyclass(frozen, module = "diffprobe")]
struct SteeringVector(steering::SteeringVector);

#[pymethods]
impl SteeringVector {
    /// Residual-stream offset `alpha · sigma · direction`.
    fn offset(&self, alpha: f64) -> Vec<f64> {
        steering::steering_offset(&self.0, alpha)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.0)
    }

    #[getter]
    fn layer(&self) -> u32 {
        self.0.layer
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }
    #[getter]
    fn direction(&self) -> Vec<f64> {
        self.0.direction.clone()
    }
}

#[pyfunction]
fn spearman(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    probe::spearman(&a, &b).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (rows, y, ridge_lambda = probe::DEFAULT_LAMBDA))]
fn fit_ridge(rows: Vec<Vec<f64>>, y: Vec<f64>, ridge_lambda: f64) -> PyResult<ProbeWeights> {
    probe::fit_ridge(&matrix(rows)?, &y, ridge_lambda).map(ProbeWeights).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (rows, y, k = 5, seed = 0, ridge_lambda = probe::DEFAULT_LAMBDA))]
fn cross_validate<'py>(
    py: Python<'py>,
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
    k: usize,
    seed: u64,
    ridge_lambda: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let x = matrix(rows)?;
    let score = py.detach(|| probe::cross_validate(&x, &y, k, seed, ridge_lambda)).map_err(err)?;
    to_dict(py, &score)
}

#[pyfunction]
#[pyo3(signature = (activations, labels, k = 5, seed = 0, ridge_lambda = probe::DEFAULT_LAMBDA, parallel = true))]
fn sweep_grid(
    py: Python<'_>,
    activations: &ActivationSet,
    labels: &DifficultyLabels,
    k: usize,
    seed: u64,
    ridge_lambda: f64,
    parallel: bool,
) -> PyResult<ProbeGrid> {
    let config = SweepConfig { k, seed, lambda: ridge_lambda, parallel };
    py.detach(|| probe::sweep_grid(&activations.0, &labels.0, &config)).map(ProbeGrid).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n_params, perf, epsilon = scaling::DEFAULT_EPSILON))]
fn fit_power_law<'py>(
    py: Python<'py>,
    n_params: Vec<f64>,
    perf: Vec<f64>,
    epsilon: f64,
) -> PyResult<Bound<'py, PyAny>> {
    if n_params.len() != perf.len() {
        return Err(DiffprobeError::new_err("n_params and perf differ in length"));
    }
    let points: Vec<_> = n_params
        .iter()
        .zip(&perf)
        .enumerate()
        .map(|(i, (&n, &p))| scaling::ScalingPoint { model_id: format!("m{i}"), n_params: n, perf: p })
        .collect();
    to_dict(py, &scaling::fit_power_law(&points, epsilon).map_err(err)?)
}

#[pyfunction]
#[pyo3(name = "predict_perf")]
fn predict_perf_py(c: f64, alpha: f64, n_params: f64) -> f64 {
    let fit = scaling::ScalingFit { c, alpha, r2_log: f64::NAN, n_points: 0, epsilon: scaling::DEFAULT_EPSILON };
    scaling::predict_perf(&fit, n_params)
}

#[pyfunction]
#[pyo3(signature = (probe, rows, model_id, dataset_name = "unknown"))]
fn build_steering_vector(
    probe: &ProbeWeights,
    rows: Vec<Vec<f64>>,
    model_id: &str,
    dataset_name: &str,
) -> PyResult<SteeringVector> {
    steering::build_steering_vector(&probe.0, &matrix(rows)?, model_id, dataset_name)
        .map(SteeringVector)
        .map_err(err)
}

#[pyfunction]
fn residual_slope<'py>(
    py: Python<'py>,
    probe_scores: Vec<f64>,
    pass1: Vec<f64>,
    steps: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let report = tracker::residual_slope(&probe_scores, &pass1, &steps).map_err(err)?;
    let dict = to_dict(py, &report)?;
    dict.set_item("summary", report.to_string())?;
    Ok(dict)
}

/// Planted single-direction dataset; returns `(ActivationSet, DifficultyLabels)`.
#[pyfunction]
#[pyo3(signature = (n, d, layers, positions, target_cell, snr, seed = 0))]
fn plant_direction_set(
    n: usize,
    d: usize,
    layers: usize,
    positions: usize,
    target_cell: (u32, i32),
    snr: f64,
    seed: u64,
) -> PyResult<(ActivationSet, DifficultyLabels)> {
    let spec = synth::PlantSpec { n, d, layers, positions, target_cell, snr, seed };
    let (set, labels) = synth::plant_direction_set(&spec).map_err(err)?;
    Ok((ActivationSet(set), DifficultyLabels(labels)))
}

#[pymodule]
fn diffprobe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DiffprobeError", m.py().get_type::<DiffprobeError>())?;
    m.add_class::<ActivationSet>()?;
    m.add_class::<DifficultyLabels>()?;
    m.add_class::<ProbeWeights>()?;
    m.add_class::<ProbeGrid>()?;
    m.add_class::<SteeringVector>()?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ridge, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_grid, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(predict_perf_py, m)?)?;
    m.add_function(wrap_pyfunction!(build_steering_vector, m)?)?;
    m.add_function(wrap_pyfunction!(residual_slope, m)?)?;
    m.add_function(wrap_pyfunction!(plant_direction_set, m)?)?;
    Ok(())
}
