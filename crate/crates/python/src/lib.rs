use std::path::PathBuf;

use cmeasure::config::{parse_config, ScenarioConfig};
use cmeasure::criteria::{affine_bound_36, affine_phi, series_divergence};
use cmeasure::intensity::{AlphaFamily, IntensitySpec};
use cmeasure::likelihood::Window;
use cmeasure::model::{EventSequence, Side, WeightRecord};
use cmeasure::rng::{path_stream, Purpose};
use cmeasure::runner::{run, Command};
use cmeasure::simulate::{simulate_aux, simulate_law, DEFAULT_EVENT_CAP};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: cmeasure::Error) -> PyErr {
    match e {
        cmeasure::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py_json<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// An intensity from the catalog, built from its JSON description.
#[pyclass(name = "Intensity", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyIntensity {
    spec: IntensitySpec,
}

#[pymethods]
impl PyIntensity {
    /// Parses a JSON object such as `{"family": "constant", "rates": [1.0]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: IntensitySpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        spec.validate("intensity").map_err(py_err)?;
        Ok(PyIntensity { spec })
    }

    #[staticmethod]
    fn constant(rates: Vec<f64>) -> PyResult<Self> {
        let spec = IntensitySpec::Constant { rates };
        spec.validate("intensity").map_err(py_err)?;
        Ok(PyIntensity { spec })
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, beta, dim = 1))]
    fn exact_affine(alpha: f64, beta: f64, dim: usize) -> PyResult<Self> {
        let spec = IntensitySpec::ExactAffine { alpha, beta, dim };
        spec.validate("intensity").map_err(py_err)?;
        Ok(PyIntensity { spec })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.spec).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.spec.family_name()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    fn __repr__(&self) -> String {
        format!("Intensity({})", self.to_json().unwrap_or_default())
    }
}

/// A realized counting path on `(0, horizon]`.
#[pyclass(name = "EventSequence", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEventSequence {
    inner: EventSequence,
}

#[pymethods]
impl PyEventSequence {
    #[new]
    #[pyo3(signature = (horizon, jumps, truncated = false))]
    fn new(horizon: f64, jumps: Vec<Vec<f64>>, truncated: bool) -> PyResult<Self> {
        Ok(PyEventSequence {
            inner: EventSequence::new(horizon, jumps, truncated).map_err(py_err)?,
        })
    }

    fn jumps(&self, coordinate: usize) -> PyResult<Vec<f64>> {
        if coordinate >= self.inner.dimension() {
            return Err(PyValueError::new_err("coordinate out of range"));
        }
        Ok(self.inner.jumps(coordinate).to_vec())
    }

    /// `N_{t-}` with `left=True`, otherwise `N_t`.
    #[pyo3(signature = (t, left = true))]
    fn count_at(&self, t: f64, left: bool) -> PyResult<Vec<usize>> {
        let side = if left { Side::Left } else { Side::Right };
        self.inner.count_at(t, side).map_err(py_err)
    }

    /// `(time, coordinate)` pairs in time order.
    fn merged(&self) -> Vec<(f64, usize)> {
        self.inner.merged()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn truncated(&self) -> bool {
        self.inner.truncated()
    }

    fn __len__(&self) -> usize {
        self.inner.total_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "EventSequence(dimension={}, horizon={}, events={})",
            self.inner.dimension(),
            self.inner.horizon(),
            self.inner.total_count()
        )
    }
}

#[pyclass(name = "WeightRecord", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyWeightRecord {
    path_id: u64,
    log_weight: f64,
    hit_zero: bool,
    quadrature_error_estimate: f64,
}

impl From<WeightRecord> for PyWeightRecord {
    fn from(r: WeightRecord) -> Self {
        PyWeightRecord {
            path_id: r.path_id,
            log_weight: r.log_weight,
            hit_zero: r.hit_zero,
            quadrature_error_estimate: r.quadrature_error_estimate,
        }
    }
}

#[pymethods]
impl PyWeightRecord {
    fn weight(&self) -> f64 {
        if self.hit_zero {
            0.0
        } else {
            self.log_weight.exp()
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "WeightRecord(path_id={}, log_weight={}, hit_zero={})",
            self.path_id, self.log_weight, self.hit_zero
        )
    }
}

/// A validated scenario.
#[pyclass(name = "ScenarioConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyScenarioConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenarioConfig {
    #[new]
    fn new(lambda_: &PyIntensity, mu: &PyIntensity, horizon: f64, n_paths: usize, seed: u64) -> PyResult<Self> {
        let inner = ScenarioConfig::new(lambda_.spec.clone(), mu.spec.clone(), horizon, n_paths, seed);
        inner.validate().map_err(py_err)?;
        Ok(PyScenarioConfig { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyScenarioConfig {
            inner: parse_config(text).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.inner.n_paths
    }

    #[setter]
    fn set_n_paths(&mut self, n: usize) {
        self.inner.n_paths = n;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }
}

/// Simulates path `path_id` of the law with intensity `spec`.
#[pyfunction]
#[pyo3(signature = (spec, horizon, seed, path_id = 0, cap = DEFAULT_EVENT_CAP))]
fn simulate(
    py: Python<'_>,
    spec: &PyIntensity,
    horizon: f64,
    seed: u64,
    path_id: u64,
    cap: usize,
) -> PyResult<PyEventSequence> {
    let spec = spec.spec.clone();
    let inner = py
        .detach(move || simulate_law(&spec, horizon, cap, &mut path_stream(seed, Purpose::Base, path_id)))
        .map_err(py_err)?;
    Ok(PyEventSequence { inner })
}

/// Log-likelihood weight of changing `lambda_` into `mu` on `(start, end]`.
/// A diffusion-driven `mu` is paired with its auxiliary path from `seed`.
#[pyfunction]
#[pyo3(signature = (path, lambda_, mu, start, end, step = 1e-3, seed = 0, path_id = 0))]
#[allow(clippy::too_many_arguments)]
fn log_weight(
    path: &PyEventSequence,
    lambda_: &PyIntensity,
    mu: &PyIntensity,
    start: f64,
    end: f64,
    step: f64,
    seed: u64,
    path_id: u64,
) -> PyResult<PyWeightRecord> {
    let window = Window::new(start, end).map_err(py_err)?;
    let aux = simulate_aux(&mu.spec, &path.inner, step, &mut path_stream(seed, Purpose::Diffusion, path_id))
        .map_err(py_err)?;
    let mut record = cmeasure::likelihood::log_weight(&path.inner, &lambda_.spec, &mu.spec, aux.as_ref(), window, step)
        .map_err(py_err)?;
    record.path_id = path_id;
    Ok(record.into())
}

/// Runs a subcommand, writing its reports into `out_dir`; returns the exit
/// code and the summary.
#[pyfunction]
fn run_command(
    py: Python<'_>,
    command: &str,
    config: &PyScenarioConfig,
    out_dir: PathBuf,
) -> PyResult<(i32, Py<PyAny>)> {
    let command: Command = command.parse().map_err(py_err)?;
    let cfg = config.inner.clone();
    let outcome = py.detach(move || run(command, &cfg, &out_dir)).map_err(py_err)?;
    Ok((outcome.exit_code(), to_py_json(py, &outcome.summary)?))
}

#[pyfunction]
fn unit_mean_test(py: Python<'_>, config: &PyScenarioConfig) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let test = py
        .detach(move || cmeasure::verify::unit_mean_test(&cfg))
        .map_err(py_err)?;
    to_py_json(py, &test)
}

/// `"divergent"` or `"convergent"` for the series of reciprocal birth rates,
/// given as a JSON sequence rule.
#[pyfunction(name = "series_divergence")]
fn py_series_divergence(alphas_json: &str) -> PyResult<&'static str> {
    let alphas: AlphaFamily = serde_json::from_str(alphas_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    alphas.validate("alphas").map_err(py_err)?;
    Ok(series_divergence(&alphas).as_str())
}

#[pyfunction(name = "affine_phi")]
fn py_affine_phi(n: u32, beta: f64, d: usize, w: f64) -> PyResult<f64> {
    affine_phi(n, beta, d, w).map_err(py_err)
}

#[pyfunction(name = "affine_bound")]
fn py_affine_bound(m: u32, beta: f64, d: usize, u: f64, t: f64) -> PyResult<f64> {
    affine_bound_36(m, beta, d, u, t).map_err(py_err)
}

#[pymodule]
fn pycmeasure(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIntensity>()?;
    m.add_class::<PyEventSequence>()?;
    m.add_class::<PyWeightRecord>()?;
    m.add_class::<PyScenarioConfig>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(log_weight, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    m.add_function(wrap_pyfunction!(unit_mean_test, m)?)?;
    m.add_function(wrap_pyfunction!(py_series_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(py_affine_phi, m)?)?;
    m.add_function(wrap_pyfunction!(py_affine_bound, m)?)?;
    Ok(())
}
