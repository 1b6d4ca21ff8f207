//! Python bindings: `import pawl`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pawl_core::bias::{self, BiasState, StepSchedule};
use pawl_core::config::RunConfig;
use pawl_core::engine::{self, Engine};
use pawl_core::harness;
use pawl_core::partition::{SplitPolicy, TemperatureLadder};
use pawl_core::target::{self, Component, GaussianMixture, TargetDensity, TemperedDensity};

fn to_py(e: pawl_core::Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

#[pyclass(name = "GaussianMixture", module = "pawl")]
struct PyMixture {
    inner: GaussianMixture,
}

#[pymethods]
impl PyMixture {
    #[new]
    fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> PyResult<Self> {
        if weights.len() != means.len() || weights.len() != sds.len() {
            return Err(PyValueError::new_err("weights, means and sds must have equal lengths"));
        }
        let components = weights
            .into_iter()
            .zip(means)
            .zip(sds)
            .map(|((weight, mean), sd)| Component { weight, mean, sd })
            .collect();
        Ok(Self {
            inner: GaussianMixture::new(components).map_err(to_py)?,
        })
    }

    /// Equal-weight mixture of N(-15, 1) and N(15, 1).
    #[staticmethod]
    fn bimodal() -> Self {
        Self {
            inner: GaussianMixture::bimodal(),
        }
    }

    fn log_density(&self, x: f64) -> f64 {
        self.inner.log_density(x)
    }

    fn tempered_log_density(&self, x: f64, temperature: f64) -> PyResult<f64> {
        let t = TemperedDensity::new(&self.inner, temperature).map_err(to_py)?;
        Ok(t.log_density(x))
    }

    #[pyo3(signature = (temperature, lo=-60.0, hi=60.0, n_points=100_000))]
    fn log_partition(&self, temperature: f64, lo: f64, hi: f64, n_points: usize) -> PyResult<f64> {
        let t = TemperedDensity::new(&self.inner, temperature).map_err(to_py)?;
        target::log_partition_quadrature(&t, lo, hi, n_points).map_err(to_py)
    }
}

#[pyclass(name = "TemperatureLadder", module = "pawl")]
struct PyLadder {
    inner: TemperatureLadder,
}

#[pymethods]
impl PyLadder {
    #[new]
    fn new(temps: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: TemperatureLadder::new(temps).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn arithmetic(t_max: f64, rungs: usize) -> PyResult<Self> {
        Ok(Self {
            inner: TemperatureLadder::arithmetic(t_max, rungs).map_err(to_py)?,
        })
    }

    #[getter]
    fn temps(&self) -> Vec<f64> {
        self.inner.temps().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn neighbors(&self, k: usize) -> PyResult<Vec<usize>> {
        self.inner.neighbors(k).map_err(to_py)
    }

    /// Returns `(new_ladder, mapping)`; `mapping` is None when no rung split.
    #[pyo3(signature = (half_counts, skew_threshold=0.75, min_samples=200, max_rungs=20))]
    fn maybe_split(
        &self,
        half_counts: Vec<(u64, u64)>,
        skew_threshold: f64,
        min_samples: u64,
        max_rungs: usize,
    ) -> PyResult<(PyLadder, Option<Vec<usize>>)> {
        let policy = SplitPolicy {
            enabled: true,
            skew_threshold,
            min_samples,
            max_rungs,
        };
        let out = self.inner.maybe_split(&policy, &half_counts).map_err(to_py)?;
        Ok((PyLadder { inner: out.ladder }, out.split.map(|s| s.mapping)))
    }
}

#[pyclass(name = "StepSchedule", module = "pawl")]
struct PySchedule {
    inner: StepSchedule,
}

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn deterministic(t0: u64) -> PyResult<Self> {
        let inner = StepSchedule::Deterministic { t0 };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (c, gamma0=1.0, decay=0.5))]
    fn wang_landau(c: f64, gamma0: f64, decay: f64) -> PyResult<Self> {
        let inner = StepSchedule::FlatHistogram { c, gamma0, decay };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (t, fh_events=0))]
    fn step_size(&self, t: u64, fh_events: u64) -> PyResult<f64> {
        self.inner.step_size(t, fh_events).map_err(to_py)
    }
}

#[pyclass(name = "BiasState", module = "pawl")]
struct PyBias {
    inner: BiasState,
}

#[pymethods]
impl PyBias {
    #[new]
    fn new(rungs: usize) -> Self {
        Self {
            inner: BiasState::uniform(rungs),
        }
    }

    #[staticmethod]
    fn from_weights(weights: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: BiasState::from_weights(&weights).map_err(to_py)?,
        })
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    #[getter]
    fn log_theta(&self) -> Vec<f64> {
        self.inner.log_theta.clone()
    }

    #[getter]
    fn nu_counts(&self) -> Vec<u64> {
        self.inner.nu_counts.clone()
    }

    fn update(&mut self, rung_hits: Vec<u64>, gamma: f64) -> PyResult<()> {
        let m = rung_hits.iter().sum();
        self.inner.update_bias(&rung_hits, m, gamma).map_err(to_py)
    }

    fn biased_log_weight(&self, rung: usize) -> PyResult<f64> {
        self.inner.biased_log_weight(rung).map_err(to_py)
    }
}

#[pyclass(name = "Summary", module = "pawl")]
struct PySummary {
    inner: engine::Summary,
}

#[pymethods]
impl PySummary {
    fn posterior_mean(&self) -> PyResult<f64> {
        self.inner.posterior_mean().map_err(to_py)
    }

    #[getter]
    fn occupation(&self) -> Vec<f64> {
        self.inner.occupation.clone()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta.clone()
    }

    #[getter]
    fn temps(&self) -> Vec<f64> {
        self.inner.temps.clone()
    }

    #[getter]
    fn accept_x(&self) -> f64 {
        self.inner.accept_x
    }

    #[getter]
    fn accept_x_window(&self) -> f64 {
        self.inner.accept_x_window
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn fh_events(&self) -> u64 {
        self.inner.fh_events
    }

    #[getter]
    fn wall_clock_s(&self) -> f64 {
        self.inner.wall_clock_s
    }

    fn __str__(&self) -> String {
        self.inner.to_kv_string()
    }
}

#[pyclass(name = "Trace", module = "pawl")]
struct PyTrace {
    inner: engine::Trace,
}

/// One trace row as exposed to Python.
type RecordTuple = (u64, usize, f64, usize, bool, bool, f64, f64, u64);

#[pymethods]
impl PyTrace {
    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    /// `(t, particle, x, rung, acc_x, acc_rung, sigma, gamma, fh_events)` tuples.
    fn records(&self) -> Vec<RecordTuple> {
        self.inner
            .records
            .iter()
            .map(|r| (r.t, r.particle, r.x, r.rung, r.accepted_x, r.accepted_rung, r.sigma, r.gamma, r.fh_events))
            .collect()
    }

    fn posterior_mean(&self) -> PyResult<f64> {
        engine::posterior_mean(&self.inner).map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }
}

/// Step-by-step access to a run.
#[pyclass(name = "Sampler", module = "pawl", unsendable)]
struct PySampler {
    engine: Engine<GaussianMixture>,
}

#[pymethods]
impl PySampler {
    #[new]
    #[pyo3(signature = (config=""))]
    fn new(config: &str) -> PyResult<Self> {
        let cfg = RunConfig::from_toml_str(config).map_err(to_py)?;
        Ok(Self {
            engine: Engine::new(&cfg).map_err(to_py)?,
        })
    }

    fn sweep(&mut self) -> PyResult<()> {
        self.engine.sweep().map_err(to_py)
    }

    #[getter]
    fn t(&self) -> u64 {
        self.engine.t()
    }

    /// `(x, rung)` per particle.
    fn particles(&self) -> Vec<(f64, usize)> {
        self.engine.particles().into_iter().map(|p| (p.x, p.rung)).collect()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.engine.bias().weights()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.engine.proposal().sigma()
    }

    /// Runs the remaining sweeps and returns the summary.
    fn finish(&mut self) -> PyResult<PySummary> {
        let inner = self.engine.run_to_end(None).map_err(to_py)?;
        Ok(PySummary { inner })
    }
}

/// Runs a TOML config to completion; returns `(trace, summary)`.
#[pyfunction]
#[pyo3(signature = (config=""))]
fn run(py: Python<'_>, config: &str) -> PyResult<(PyTrace, PySummary)> {
    let cfg = RunConfig::from_toml_str(config).map_err(to_py)?;
    let (trace, summary) = py.detach(|| engine::run(&cfg)).map_err(to_py)?;
    Ok((PyTrace { inner: trace }, PySummary { inner: summary }))
}

#[pyfunction]
#[pyo3(signature = (config=""))]
fn run_summary(py: Python<'_>, config: &str) -> PyResult<PySummary> {
    let cfg = RunConfig::from_toml_str(config).map_err(to_py)?;
    let inner = py.detach(|| engine::run_summary(&cfg)).map_err(to_py)?;
    Ok(PySummary { inner })
}

#[pyfunction]
fn flat_histogram_met(counts: Vec<u64>, c: f64) -> bool {
    bias::flat_histogram_met(&counts, c)
}

#[pyfunction]
#[pyo3(signature = (estimates, truth=0.0))]
fn rmse(estimates: Vec<f64>, truth: f64) -> f64 {
    harness::rmse(&estimates, truth)
}

#[pymodule]
fn pawl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMixture>()?;
    m.add_class::<PyLadder>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyBias>()?;
    m.add_class::<PySummary>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PySampler>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_summary, m)?)?;
    m.add_function(wrap_pyfunction!(flat_histogram_met, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    Ok(())
}
