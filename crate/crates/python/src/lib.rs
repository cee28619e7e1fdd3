//! Python bindings: configs, objective evaluation, runs and front traces.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use shapeflow::config::ProblemConfig;
use shapeflow::pareto::FrontPoint;
use shapeflow::run::{obstacle_side, MethodSummary, Side};
use shapeflow::Error;

create_exception!(shapeflow_py, NumericalError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Contract(_) | Error::Domain(_) | Error::DegenerateShape { .. } => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io(_) | Error::Csv(_) => PyOSError::new_err(e.to_string()),
        _ => NumericalError::new_err(e.to_string()),
    }
}

fn side_str(s: Side) -> &'static str {
    match s {
        Side::Above => "above",
        Side::Below => "below",
        Side::Overlapping => "overlapping",
    }
}

/// A validated problem configuration.
#[pyclass(name = "Config", module = "shapeflow_py")]
#[derive(Clone)]
struct PyConfig {
    inner: ProblemConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ProblemConfig::load(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ProblemConfig::from_toml(text).map(|inner| Self { inner }).map_err(py_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    /// Free coefficients of the configured starting shape.
    fn initial_shape(&self) -> PyResult<Vec<f64>> {
        self.inner.build_initial_shape().map(|s| s.to_flat()).map_err(py_err)
    }

    /// Free coefficients of the straight joint between the two clamped ends.
    fn straight_shape(&self) -> PyResult<Vec<f64>> {
        self.inner.straight_shape().map(|s| s.to_flat()).map_err(py_err)
    }

    fn problem(&self) -> PyResult<PyProblem> {
        self.inner.build_problem().map(|inner| PyProblem { inner }).map_err(py_err)
    }
}

/// Objective functionals of a configured problem.
#[pyclass(name = "Problem", module = "shapeflow_py")]
struct PyProblem {
    inner: shapeflow::Problem,
}

#[pymethods]
impl PyProblem {
    /// Returns `(j1, j2, j3, j_lambda)`.
    fn evaluate(&self, q: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
        let p = self.inner.params(&q).map_err(py_err)?;
        let v = self.inner.evaluate(&p).map_err(py_err)?;
        Ok((v.j1, v.j2, v.j3, v.j_lambda))
    }

    /// Gradient of the weighted objective.
    fn gradient(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = self.inner.params(&q).map_err(py_err)?;
        self.inner.gradient(&p).map(|g| g.total).map_err(py_err)
    }

    /// "above", "below" or "overlapping" relative to the obstacle.
    fn side(&self, q: Vec<f64>) -> PyResult<&'static str> {
        obstacle_side(&self.inner, &q).map(side_str).map_err(py_err)
    }
}

fn summary_dict<'py>(py: Python<'py>, s: &MethodSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", &s.method)?;
    d.set_item("termination", &s.termination)?;
    d.set_item("error", &s.error)?;
    d.set_item("steps", s.steps)?;
    d.set_item("j_lambda", s.j_lambda)?;
    d.set_item("j1", s.j1)?;
    d.set_item("j2", s.j2)?;
    d.set_item("j3", s.j3)?;
    d.set_item("gradient_norm", s.gradient_norm)?;
    d.set_item("side", side_str(s.side))?;
    d.set_item("q", &s.q)?;
    Ok(d)
}

fn front_dict<'py>(py: Python<'py>, p: &FrontPoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("weight", p.weight)?;
    d.set_item("j1", p.j1)?;
    d.set_item("j2", p.j2)?;
    d.set_item("residual", p.residual)?;
    d.set_item("iterations", p.iterations)?;
    d.set_item("converged", p.converged)?;
    d.set_item("q", &p.q_opt)?;
    Ok(d)
}

/// Runs the configured optimizers, writing artifacts into `directory`.
///
/// Returns a dict keyed by method name with the final summaries.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &PyConfig, directory: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let report = py.allow_threads(|| shapeflow::run::run(&config.inner, &directory)).map_err(py_err)?;
    let d = PyDict::new(py);
    for m in report.gd.iter().chain(&report.hamiltonian) {
        d.set_item(&m.summary.method, summary_dict(py, &m.summary)?)?;
    }
    Ok(d)
}

/// Traces a local (J1, J2) front from `start`; returns `(front, filtered)`.
#[pyfunction]
fn trace<'py>(
    py: Python<'py>,
    config: &PyConfig,
    start: Vec<f64>,
    directory: PathBuf,
) -> PyResult<(Vec<Bound<'py, PyDict>>, Vec<Bound<'py, PyDict>>)> {
    let report = py.allow_threads(|| shapeflow::run::trace(&config.inner, &start, &directory)).map_err(py_err)?;
    let front = report.front.iter().map(|p| front_dict(py, p)).collect::<PyResult<_>>()?;
    let filtered = report.filtered.iter().map(|p| front_dict(py, p)).collect::<PyResult<_>>()?;
    Ok((front, filtered))
}

/// Structural checks; a list of `(name, passed, detail)`.
#[pyfunction]
fn check(config: &PyConfig) -> PyResult<Vec<(String, bool, String)>> {
    let out = shapeflow::checks::run_checks(&config.inner).map_err(py_err)?;
    Ok(out.into_iter().map(|c| (c.name.to_owned(), c.passed, c.detail)).collect())
}

#[pymodule]
fn shapeflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(trace, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("OUTPUT_ROOT_ENV", shapeflow::run::OUTPUT_ROOT_ENV)?;
    Ok(())
}
