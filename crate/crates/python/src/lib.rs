//! Python bindings: problems, simulation, identification and certificates.

use std::collections::BTreeMap;

use heatpencil_core::pencil::{self, PencilConfig};
use heatpencil_core::pipeline;
use heatpencil_core::{benchmark, bounds, model, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(heatpencil, HeatPencilError, PyException);

fn to_py(e: Error) -> PyErr {
    match e.root() {
        Error::InvalidInput(_) => PyValueError::new_err(e.to_string()),
        _ => HeatPencilError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "HeatProblem", module = "heatpencil", from_py_object)]
#[derive(Clone)]
struct PyHeatProblem(model::HeatProblem);

#[pymethods]
impl PyHeatProblem {
    #[new]
    #[pyo3(signature = (alpha, u0_cosine, t1, t2, t3, control_amplitude = 1.0, control_modes = None))]
    fn new(
        alpha: f64,
        u0_cosine: BTreeMap<usize, f64>,
        t1: f64,
        t2: f64,
        t3: f64,
        control_amplitude: f64,
        control_modes: Option<usize>,
    ) -> PyResult<Self> {
        let mut p = model::HeatProblem::new(alpha, u0_cosine, t1, t2, t3, control_amplitude)
            .map_err(to_py)?;
        p.control_modes = control_modes;
        Ok(PyHeatProblem(p))
    }

    /// The built-in reference configuration.
    #[staticmethod]
    fn reference() -> Self {
        PyHeatProblem(benchmark::problem())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let p: model::HeatProblem =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        p.validate().map_err(to_py)?;
        Ok(PyHeatProblem(p))
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn u0_cosine(&self) -> BTreeMap<usize, f64> {
        self.0.u0_coeffs.clone()
    }

    #[getter]
    fn windows(&self) -> (f64, f64, f64) {
        (self.0.t1, self.0.t2, self.0.t3)
    }

    fn free_response(&self, t: f64) -> f64 {
        self.0.free_response(t)
    }

    fn step_response(&self, t: f64) -> PyResult<f64> {
        self.0.step_response(t).map_err(to_py)
    }

    fn observe(&self, t: f64) -> f64 {
        self.0.observe(t)
    }

    fn initial_state(&self, x: f64) -> f64 {
        self.0.initial_state(x)
    }

    /// `count` samples on `[ta, tb)`.
    fn sample_window(&self, ta: f64, tb: f64, count: usize) -> PyResult<PyTrace> {
        self.0
            .sample_window(ta, tb, count)
            .map(PyTrace)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "HeatProblem(alpha={}, modes={}, windows=({}, {}, {}))",
            self.0.alpha,
            self.0.u0_coeffs.len(),
            self.0.t1,
            self.0.t2,
            self.0.t3
        )
    }
}

#[pyclass(name = "SampleTrace", module = "heatpencil", from_py_object)]
#[derive(Clone)]
struct PyTrace(model::SampleTrace);

#[pymethods]
impl PyTrace {
    #[new]
    fn new(t_start: f64, period: f64, values: Vec<f64>) -> PyResult<Self> {
        model::SampleTrace::new(t_start, period, values)
            .map(PyTrace)
            .map_err(to_py)
    }

    #[getter]
    fn t_start(&self) -> f64 {
        self.0.t_start
    }

    #[getter]
    fn period(&self) -> f64 {
        self.0.period
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    fn times(&self) -> Vec<f64> {
        self.0.times()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "PipelineConfig", module = "heatpencil", from_py_object)]
#[derive(Clone)]
struct PyConfig(pipeline::PipelineConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (n1 = 50, n2 = 50, epsilon = 1e-10, t0 = 0.01, m_tilde = 20, n_rec = 79, credibility_tol = 1e-3))]
    fn new(
        n1: usize,
        n2: usize,
        epsilon: f64,
        t0: f64,
        m_tilde: usize,
        n_rec: usize,
        credibility_tol: f64,
    ) -> PyResult<Self> {
        let cfg = pipeline::PipelineConfig {
            n1,
            n2,
            epsilon,
            t0,
            m_tilde,
            n_rec,
            credibility_tol,
            ..Default::default()
        };
        cfg.validate().map_err(to_py)?;
        Ok(PyConfig(cfg))
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

#[pyclass(name = "Priors", module = "heatpencil", from_py_object)]
#[derive(Clone)]
struct PyPriors(pipeline::Priors);

#[pymethods]
impl PyPriors {
    #[new]
    fn new(m0: f64, alpha0: f64) -> Self {
        PyPriors(pipeline::Priors { m0, alpha0 })
    }

    #[getter]
    fn m0(&self) -> f64 {
        self.0.m0
    }

    #[getter]
    fn alpha0(&self) -> f64 {
        self.0.alpha0
    }
}

#[pyclass(name = "Traces", module = "heatpencil", from_py_object)]
#[derive(Clone)]
struct PyTraces(pipeline::Traces);

#[pymethods]
impl PyTraces {
    #[new]
    fn new(free: PyTrace, step: PyTrace, rec: PyTrace) -> Self {
        PyTraces(pipeline::Traces {
            free: free.0,
            step: step.0,
            rec: rec.0,
        })
    }

    #[getter]
    fn free(&self) -> PyTrace {
        PyTrace(self.0.free.clone())
    }

    #[getter]
    fn step(&self) -> PyTrace {
        PyTrace(self.0.step.clone())
    }

    #[getter]
    fn rec(&self) -> PyTrace {
        PyTrace(self.0.rec.clone())
    }
}

#[pyclass(name = "ErrorCertificate", module = "heatpencil", skip_from_py_object)]
struct PyCertificate(bounds::ErrorCertificate);

#[pymethods]
impl PyCertificate {
    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho
    }

    #[getter]
    fn kappa_xm(&self) -> f64 {
        self.0.kappa_xm
    }

    #[getter]
    fn pole_bound(&self) -> f64 {
        self.0.pole_bound
    }

    #[getter]
    fn alpha_bound(&self) -> f64 {
        self.0.alpha_bound
    }

    #[getter]
    fn alpha_interval(&self) -> (f64, f64) {
        self.0.alpha_interval
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

#[pyclass(
    name = "IdentificationResult",
    module = "heatpencil",
    skip_from_py_object
)]
struct PyIdentification(pipeline::IdentificationResult);

#[pymethods]
impl PyIdentification {
    #[getter]
    fn alpha_hat(&self) -> f64 {
        self.0.alpha_hat
    }

    #[getter]
    fn u0_cosine_hat(&self) -> Vec<f64> {
        self.0.u0_cosine_hat.clone()
    }

    #[getter]
    fn gcv_k(&self) -> usize {
        self.0.gcv_k
    }

    #[getter]
    fn gcv_curve(&self) -> Vec<f64> {
        self.0.gcv_curve.clone()
    }

    /// `(n, lambda, C)` for each free-window mode.
    #[getter]
    fn free_modes(&self) -> Vec<(usize, f64, f64)> {
        self.0
            .free_modes
            .iter()
            .map(|m| (m.n, m.lambda, m.coefficient))
            .collect()
    }

    #[getter]
    fn certificate(&self) -> Option<PyCertificate> {
        self.0.certificate.clone().map(PyCertificate)
    }

    #[getter]
    fn certificate_error(&self) -> Option<String> {
        self.0.diagnostics.certificate_error.clone()
    }

    fn initial_state(&self, x: f64) -> f64 {
        self.0.initial_state(x)
    }

    /// Certificate for the given priors; raises when the hypotheses fail.
    fn certify(&self, priors: PyPriors) -> PyResult<PyCertificate> {
        let inputs = self.0.bound_inputs(priors.0).map_err(to_py)?;
        bounds::certificate(&inputs, self.0.alpha_hat, &self.0.indexed_poles())
            .map(PyCertificate)
            .map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

#[pyclass(name = "PencilEstimate", module = "heatpencil", skip_from_py_object)]
struct PyPencil(pencil::PencilEstimate);

#[pymethods]
impl PyPencil {
    #[getter]
    fn order(&self) -> usize {
        self.0.order
    }

    #[getter]
    fn poles(&self) -> Vec<f64> {
        self.0.poles.clone()
    }

    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.0.rates.clone()
    }

    #[getter]
    fn amplitudes(&self) -> Vec<f64> {
        self.0.amplitudes.clone()
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.0.singular_values.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.0)
    }
}

/// Samples the free, controlled and reconstruction windows of `problem`.
#[pyfunction]
#[pyo3(signature = (problem, config = None))]
fn simulate(problem: &PyHeatProblem, config: Option<PyConfig>) -> PyResult<PyTraces> {
    let cfg = config.map(|c| c.0).unwrap_or_default();
    pipeline::simulate_traces(&problem.0, &cfg)
        .map(PyTraces)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (traces, config = None, priors = None))]
fn identify(
    traces: &PyTraces,
    config: Option<PyConfig>,
    priors: Option<PyPriors>,
) -> PyResult<PyIdentification> {
    let cfg = config.map(|c| c.0).unwrap_or_default();
    pipeline::identify(&traces.0, &cfg, priors.map(|p| p.0))
        .map(PyIdentification)
        .map_err(to_py)
}

/// Matrix pencil estimate of a uniformly sampled sum of decaying exponentials.
#[pyfunction]
#[pyo3(signature = (trace, threshold = 1e-10))]
fn analyze(trace: &PyTrace, threshold: f64) -> PyResult<PyPencil> {
    pencil::analyze(&trace.0, &PencilConfig::default().with_threshold(threshold))
        .map(PyPencil)
        .map_err(to_py)
}

#[pyfunction]
fn tail_bound(m0: f64, alpha0: f64, m: usize, t: f64) -> f64 {
    bounds::tail_bound(m0, alpha0, m, t)
}

#[pymodule]
fn heatpencil(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HeatPencilError", m.py().get_type::<HeatPencilError>())?;
    m.add_class::<PyHeatProblem>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyPriors>()?;
    m.add_class::<PyTraces>()?;
    m.add_class::<PyCertificate>()?;
    m.add_class::<PyIdentification>()?;
    m.add_class::<PyPencil>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(tail_bound, m)?)?;
    Ok(())
}
