//! Python module `nlrobot`. Structured values cross the boundary as plain
//! dicts and lists (decoded from the same JSON the HTTP API uses).

use std::sync::Mutex;

use nlrobot_core::bench::{generate_tasks, run_coffee};
use nlrobot_core::dmp::{fit, DemonstrationTrajectory, Gains};
use nlrobot_core::gateway::GatewayConfig;
use nlrobot_core::parser::{parse_response as parse_text, OutputMode};
use nlrobot_core::session::{Session as CoreSession, SessionConfig};
use nlrobot_core::sim::PerturbationEvent;
use nlrobot_core::Scenario;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

/// Return of a session: sum over episodes of -beta^tau * (1 + f_tau).
#[pyfunction]
#[pyo3(signature = (flags, beta = 1.0))]
fn compute_return(flags: Vec<u8>, beta: f64) -> PyResult<f64> {
    nlrobot_core::compute_return(&flags, beta).map_err(err)
}

/// Extracts and parses the first fenced behavior in a model reply.
#[pyfunction]
fn parse_response<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &parse_text(text).map_err(err)?.root)
}

#[pyfunction]
#[pyo3(signature = (mode = "sequence"))]
fn coffee<'py>(py: Python<'py>, mode: &str) -> PyResult<Bound<'py, PyAny>> {
    let mode: OutputMode = mode.parse().map_err(err)?;
    let r = run_coffee(mode).map_err(err)?;
    to_py(
        py,
        &serde_json::json!({
            "passed": r.passed(),
            "failure": r.failure,
            "steps": r.steps,
            "return": r.ledger_value,
        }),
    )
}

#[pyfunction]
#[pyo3(signature = (min_size = 2, max_size = 8, per_size = 5, seed = 42))]
fn tasks<'py>(py: Python<'py>, min_size: usize, max_size: usize, per_size: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &generate_tasks(min_size..=max_size, per_size, seed))
}

/// Fits a DMP to `positions[k][d]` sampled at `times[k]`; returns the model dict.
#[pyfunction]
#[pyo3(signature = (times, positions, n_basis = 50))]
fn fit_dmp<'py>(py: Python<'py>, times: Vec<f64>, positions: Vec<Vec<f64>>, n_basis: usize) -> PyResult<Bound<'py, PyAny>> {
    let demo = DemonstrationTrajectory::new(times, positions, "demo").map_err(err)?;
    to_py(py, &fit(&demo, n_basis, Gains::default()).map_err(err)?)
}

/// A conversation with the robot.
#[pyclass]
struct Session {
    inner: Mutex<CoreSession>,
}

impl Session {
    fn with<T>(&self, f: impl FnOnce(&mut CoreSession) -> T) -> T {
        f(&mut self.inner.lock().expect("session lock"))
    }
}

#[pymethods]
impl Session {
    /// `Session(n_boxes=4, seed=0, gateway="oracle", mode="sequence")` for a
    /// tabletop scene, or `Session(config=dict)` with a full session config.
    #[new]
    #[pyo3(signature = (n_boxes = 4, seed = 0, gateway = "oracle", mode = "sequence", config = None))]
    fn new(
        py: Python<'_>,
        n_boxes: usize,
        seed: u64,
        gateway: &str,
        mode: &str,
        config: Option<Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let cfg = match config {
            Some(c) => from_py::<SessionConfig>(py, &c)?,
            None => SessionConfig::new(Scenario::tabletop(n_boxes, seed), gateway.parse::<GatewayConfig>().map_err(err)?)
                .with_mode(mode.parse().map_err(err)?),
        };
        Ok(Self {
            inner: Mutex::new(CoreSession::create(cfg).map_err(err)?),
        })
    }

    #[getter]
    fn id(&self) -> String {
        self.with(|s| s.id().to_string())
    }

    /// Task on the first call, corrective feedback afterwards. Returns the episode record.
    fn send<'py>(&self, py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
        let rec = self.with(|s| s.submit_message(text)).map_err(err)?;
        to_py(py, &rec)
    }

    fn perturb(&self, py: Python<'_>, event: Bound<'_, PyAny>) -> PyResult<()> {
        let event: PerturbationEvent = from_py(py, &event)?;
        self.with(|s| s.inject_perturbation(event)).map_err(err)
    }

    fn describe(&self, id: &str) -> String {
        self.with(|s| s.world().descriptor(id))
    }

    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let view = self.with(|s| s.view());
        to_py(py, &view)
    }

    #[getter]
    fn ledger(&self) -> f64 {
        self.with(|s| s.ledger().value)
    }

    fn close(&self) -> PyResult<()> {
        self.with(|s| s.close()).map_err(err)
    }
}

#[pymodule]
fn nlrobot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(compute_return, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(coffee, m)?)?;
    m.add_function(wrap_pyfunction!(tasks, m)?)?;
    m.add_function(wrap_pyfunction!(fit_dmp, m)?)?;
    m.add_class::<Session>()?;
    Ok(())
}
