//! Python bindings: statevector simulation, trajectories, ridge readout,
//! metrics and full experiment runs.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hqrc::dynamics::{integrate_rk4_substeps, OdeSystem, Trajectory, Units};
use hqrc::experiment::{run_experiment as run_core, ExperimentConfig};
use hqrc::measurement::{all_to_all_size, MeasurementScheme, Observables};
use hqrc::metrics::{vpt as vpt_core, VptConfig};
use hqrc::readout::fit_ridge as fit_ridge_core;
use hqrc::rng::{seeded, stream};
use hqrc::statevector::{GateOp, PauliString, Shots, StateVector as CoreState};
use hqrc::HqrcError;

fn to_py(e: HqrcError) -> PyErr {
    match e {
        HqrcError::Config(_) | HqrcError::Usage(_) | HqrcError::Serialization(_) => PyValueError::new_err(e.to_string()),
        HqrcError::Io(_) => PyIOError::new_err(e.to_string()),
        HqrcError::Numeric { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_shots(shots: Option<u64>) -> Shots {
    shots.map_or(Shots::Exact, Shots::Finite)
}

/// n-qubit register starting in |0…0⟩. Qubit 0 is the least significant bit.
#[pyclass(name = "StateVector")]
struct PyStateVector {
    inner: CoreState,
}

#[pymethods]
impl PyStateVector {
    #[new]
    fn new(n_qubits: usize) -> PyResult<Self> {
        Ok(Self {
            inner: CoreState::new(n_qubits).map_err(to_py)?,
        })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn rx(&mut self, qubit: usize, theta: f64) -> PyResult<()> {
        self.inner.apply(&GateOp::Rx { qubit, theta }).map_err(to_py)
    }

    fn ry(&mut self, qubit: usize, theta: f64) -> PyResult<()> {
        self.inner.apply(&GateOp::Ry { qubit, theta }).map_err(to_py)
    }

    fn rz(&mut self, qubit: usize, theta: f64) -> PyResult<()> {
        self.inner.apply(&GateOp::Rz { qubit, theta }).map_err(to_py)
    }

    fn u3(&mut self, qubit: usize, alpha: f64, beta: f64, gamma: f64) -> PyResult<()> {
        self.inner
            .apply(&GateOp::U3 {
                qubit,
                alpha,
                beta,
                gamma,
            })
            .map_err(to_py)
    }

    fn cx(&mut self, control: usize, target: usize) -> PyResult<()> {
        self.inner.apply(&GateOp::Cx { control, target }).map_err(to_py)
    }

    /// Exact ⟨ψ|P|ψ⟩ for a same-axis Pauli string such as "X0X1".
    fn expectation(&self, pauli: &str) -> PyResult<f64> {
        let p: PauliString = pauli.parse().map_err(to_py)?;
        self.inner.expectation(&p).map_err(to_py)
    }

    fn probabilities(&self) -> Vec<f64> {
        self.inner.probabilities()
    }

    /// Amplitudes as (real, imaginary) pairs.
    fn amplitudes(&self) -> Vec<(f64, f64)> {
        self.inner.amplitudes().iter().map(|c| (c.re, c.im)).collect()
    }

    /// Measurement vector in X, Y, Z with all-to-all correlators up to
    /// `max_order`; `shots=None` gives exact expectations.
    #[pyo3(signature = (max_order = 2, shots = None, seed = 0))]
    fn measure(&self, max_order: usize, shots: Option<u64>, seed: u64) -> PyResult<Vec<f64>> {
        let obs = Observables::new(self.inner.n_qubits(), &MeasurementScheme::all_to_all(max_order)).map_err(to_py)?;
        let mut rng = seeded(seed, stream::SHOTS);
        Ok(obs.measure(&self.inner, parse_shots(shots), &mut rng).map_err(to_py)?.values)
    }

    /// Labels of the measurement vector entries, in order.
    #[staticmethod]
    #[pyo3(signature = (n_qubits, max_order = 2))]
    fn observable_labels(n_qubits: usize, max_order: usize) -> PyResult<Vec<String>> {
        let obs = Observables::new(n_qubits, &MeasurementScheme::all_to_all(max_order)).map_err(to_py)?;
        Ok(obs.as_slice().iter().map(ToString::to_string).collect())
    }
}

/// Length of the all-to-all X/Y/Z measurement vector.
#[pyfunction]
#[pyo3(signature = (n_qubits, max_order = 2))]
fn measurement_size(n_qubits: usize, max_order: usize) -> usize {
    all_to_all_size(n_qubits, max_order)
}

fn integrate(system: OdeSystem, steps: usize, dt: Option<f64>, substeps: Option<usize>, initial: Option<[f64; 3]>) -> PyResult<Vec<Vec<f64>>> {
    let t = integrate_rk4_substeps(
        &system,
        initial.unwrap_or(system.default_initial()),
        dt.unwrap_or(system.default_dt()),
        steps,
        substeps.unwrap_or(system.default_substeps()),
    )
    .map_err(to_py)?;
    Ok(t.points)
}

/// RK4 Lorenz63 trajectory of `steps + 1` points.
#[pyfunction]
#[pyo3(signature = (steps, dt = None, substeps = None, initial = None))]
fn lorenz63(steps: usize, dt: Option<f64>, substeps: Option<usize>, initial: Option<[f64; 3]>) -> PyResult<Vec<Vec<f64>>> {
    integrate(OdeSystem::lorenz63(), steps, dt, substeps, initial)
}

/// RK4 double-scroll trajectory of `steps + 1` points.
#[pyfunction]
#[pyo3(signature = (steps, dt = None, substeps = None, initial = None))]
fn double_scroll(steps: usize, dt: Option<f64>, substeps: Option<usize>, initial: Option<[f64; 3]>) -> PyResult<Vec<Vec<f64>>> {
    integrate(OdeSystem::double_scroll(), steps, dt, substeps, initial)
}

fn matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err(format!("{what} rows differ in length")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Ridge readout `W = Y Rᵀ (R Rᵀ + βI)⁻¹`; `r` is features × samples and `y`
/// outputs × samples, both as lists of rows.
#[pyfunction]
fn fit_ridge(r: Vec<Vec<f64>>, y: Vec<Vec<f64>>, beta: f64) -> PyResult<Vec<Vec<f64>>> {
    let w = fit_ridge_core(&matrix(&r, "R")?, &matrix(&y, "Y")?, beta).map_err(to_py)?;
    Ok(w.row_iter().map(|row| row.iter().copied().collect()).collect())
}

/// Valid prediction time: returns `(time, steps, censored)`. `sigma` defaults
/// to the truth's per-component standard deviation.
#[pyfunction]
#[pyo3(signature = (pred, truth, dt, epsilon = 0.3, sigma = None))]
fn vpt(
    pred: Vec<Vec<f64>>,
    truth: Vec<Vec<f64>>,
    dt: f64,
    epsilon: f64,
    sigma: Option<Vec<f64>>,
) -> PyResult<(f64, usize, bool)> {
    let p = Trajectory::new(dt, pred, Units::Normalized).map_err(to_py)?;
    let t = Trajectory::new(dt, truth, Units::Normalized).map_err(to_py)?;
    let mut cfg = VptConfig::from_truth(&t, epsilon);
    if let Some(s) = sigma {
        cfg.sigma = s;
    }
    let v = vpt_core(&p, &t, &cfg).map_err(to_py)?;
    Ok((v.time, v.steps, v.censored))
}

/// Default experiment configuration as JSON.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_json().map_err(to_py)
}

/// Hash identifying a configuration (seeds excluded).
#[pyfunction]
fn config_hash(config: &str) -> PyResult<String> {
    Ok(ExperimentConfig::from_str_auto(config, None).map_err(to_py)?.config_hash())
}

/// Full pipeline for one seed. `config` is JSON or TOML text; returns the run
/// summary plus normalized truth/prediction windows as a JSON string.
#[pyfunction]
#[pyo3(signature = (config, seed = 0))]
fn run_experiment(py: Python<'_>, config: &str, seed: u64) -> PyResult<String> {
    let cfg = ExperimentConfig::from_str_auto(config, None).map_err(to_py)?;
    let out = py.detach(|| run_core(&cfg, seed)).map_err(to_py)?;
    let v = serde_json::json!({
        "summary": out.summary,
        "truth": out.truth.points,
        "prediction": out.prediction.points,
        "scale": out.normalizer.scale,
        "model": out.model,
    });
    Ok(v.to_string())
}

#[pymodule(name = "hqrc")]
pub fn hqrc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStateVector>()?;
    m.add_function(wrap_pyfunction!(measurement_size, m)?)?;
    m.add_function(wrap_pyfunction!(lorenz63, m)?)?;
    m.add_function(wrap_pyfunction!(double_scroll, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ridge, m)?)?;
    m.add_function(wrap_pyfunction!(vpt, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
