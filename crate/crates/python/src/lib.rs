//! Python bindings. Problems are passed as JSON specs (the same documents the
//! CLI reads); structured results come back as dicts.

use nalgebra::DVector;
use proxflow::discrete::run_inertial;
use proxflow::dynamics::{default_sample_every, integrate as integrate_flow, Trajectory as FlowTrajectory};
use proxflow::lyapunov::{check_monotone, monitor};
use proxflow::params::{derive_params, rate_envelope_constants, SystemParams};
use proxflow::problems::{make_problem, prox_grad_residual as residual, Objective, ProblemSpec};
use proxflow::rates::{classify_rate, RateOptions};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py_err(e: proxflow::Error) -> PyErr {
    use proxflow::Error::*;
    match e {
        NonFinite { .. } | Diverged { .. } | NotConverged { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn problem(spec: &str) -> PyResult<Objective> {
    let spec: ProblemSpec =
        serde_json::from_str(spec).map_err(|e| PyValueError::new_err(format!("bad problem spec: {e}")))?;
    make_problem(&spec).map_err(to_py_err)
}

fn vector(x: Vec<f64>, dim: usize, what: &str) -> PyResult<DVector<f64>> {
    if x.len() != dim {
        return Err(PyValueError::new_err(format!(
            "{what} has {} entries, problem dimension is {dim}",
            x.len()
        )));
    }
    Ok(DVector::from_vec(x))
}

/// Serializable value to a Python object through `json.loads`.
fn json_value<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn rows(vs: &[DVector<f64>]) -> Vec<Vec<f64>> {
    vs.iter().map(|v| v.iter().copied().collect()).collect()
}

#[pyfunction]
fn lipschitz_l1(gamma: f64, lambda_beta: f64) -> f64 {
    proxflow::params::lipschitz_l1(gamma, lambda_beta)
}

#[pyfunction]
fn lipschitz_l2(gamma: f64, lambda_beta: f64) -> f64 {
    proxflow::params::lipschitz_l2(gamma, lambda_beta)
}

/// Every derived constant; `m` and `r0` are `None` for infeasible params.
#[pyfunction]
#[pyo3(signature = (gamma, lam, beta))]
fn check_params<'py>(py: Python<'py>, gamma: f64, lam: f64, beta: f64) -> PyResult<Bound<'py, PyAny>> {
    let params = derive_params(gamma, lam, beta).map_err(to_py_err)?;
    let out = json_value(py, &params)?;
    let env = rate_envelope_constants(&params).ok();
    out.set_item("m", env.map(|e| e.m))?;
    out.set_item("r0", env.map(|e| e.r0))?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (spec, lam, x))]
fn prox_grad_residual(spec: &str, lam: f64, x: Vec<f64>) -> PyResult<f64> {
    let obj = problem(spec)?;
    if lam.is_nan() || lam <= 0.0 {
        return Err(PyValueError::new_err("lam must be > 0"));
    }
    let x = vector(x, obj.dim(), "x")?;
    Ok(residual(&obj, lam, &x))
}

/// A sampled flow trajectory together with its problem and parameters.
#[pyclass(frozen, module = "proxflow_py")]
struct Trajectory {
    traj: FlowTrajectory,
    obj: Objective,
    params: SystemParams,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.traj.times.clone()
    }

    #[getter]
    fn xs(&self) -> Vec<Vec<f64>> {
        rows(&self.traj.xs)
    }

    #[getter]
    fn vs(&self) -> Vec<Vec<f64>> {
        rows(&self.traj.vs)
    }

    #[getter]
    fn accs(&self) -> Vec<Vec<f64>> {
        rows(&self.traj.accs)
    }

    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_value(py, &self.params)
    }

    fn __len__(&self) -> usize {
        self.traj.len()
    }

    /// Energy trace columns keyed by name.
    fn energy<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let trace = monitor(&self.obj, &self.params, &self.traj).map_err(to_py_err)?;
        json_value(py, &trace)
    }

    /// No step of the energy rises by more than `1e-6 (1 + |E(0)|)`.
    fn energy_monotone(&self) -> PyResult<bool> {
        let trace = monitor(&self.obj, &self.params, &self.traj).map_err(to_py_err)?;
        let tol = 1e-6 * (1.0 + trace.energy[0].abs());
        Ok(check_monotone(&trace, tol).is_clean())
    }

    /// Rate report with the final sample as the limit unless `x_limit` is given.
    #[pyo3(signature = (x_limit=None, t0=None))]
    fn rates<'py>(&self, py: Python<'py>, x_limit: Option<Vec<f64>>, t0: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let x_limit = x_limit.map(|x| vector(x, self.traj.dim(), "x_limit")).transpose()?;
        let opts = RateOptions {
            x_limit,
            t0,
            ..RateOptions::default()
        };
        let report = classify_rate(&self.traj, &opts).map_err(to_py_err)?;
        json_value(py, &report)
    }
}

#[pyfunction]
#[pyo3(signature = (spec, gamma, lam, u0, v0, t_end, h, sample_every=None))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    spec: &str,
    gamma: f64,
    lam: f64,
    u0: Vec<f64>,
    v0: Vec<f64>,
    t_end: f64,
    h: f64,
    sample_every: Option<usize>,
) -> PyResult<Trajectory> {
    let obj = problem(spec)?;
    let params = derive_params(gamma, lam, obj.beta()).map_err(to_py_err)?;
    let (u0, v0) = (vector(u0, obj.dim(), "u0")?, vector(v0, obj.dim(), "v0")?);
    let every = sample_every.unwrap_or_else(|| default_sample_every(t_end, h));
    let traj = integrate_flow(&obj, &params, &u0, &v0, t_end, h, every).map_err(to_py_err)?;
    Ok(Trajectory { traj, obj, params })
}

/// Unit-step inertial recursion with constant damping.
#[pyfunction]
#[pyo3(signature = (spec, lam, gamma, x0, x1=None, max_iter=10_000, tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn run_discrete<'py>(
    py: Python<'py>,
    spec: &str,
    lam: f64,
    gamma: f64,
    x0: Vec<f64>,
    x1: Option<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let obj = problem(spec)?;
    let x0 = vector(x0, obj.dim(), "x0")?;
    let x1 = match x1 {
        Some(x) => vector(x, obj.dim(), "x1")?,
        None => x0.clone(),
    };
    let hist = run_inertial(&obj, lam, |_| gamma, &x0, &x1, max_iter, tol).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("xs", rows(&hist.xs))?;
    out.set_item("residuals", hist.residuals.clone())?;
    out.set_item("objective_values", hist.objective_values.clone())?;
    out.set_item("converged", hist.converged)?;
    out.set_item("iterations", hist.iterations)?;
    Ok(out)
}

#[pymodule]
fn proxflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(lipschitz_l1, m)?)?;
    m.add_function(wrap_pyfunction!(lipschitz_l2, m)?)?;
    m.add_function(wrap_pyfunction!(check_params, m)?)?;
    m.add_function(wrap_pyfunction!(prox_grad_residual, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(run_discrete, m)?)?;
    Ok(())
}
