//! Inertial proximal-gradient recursion from the explicit discretization
//!
//! ```text
//! (x_{k+1} - 2x_k + x_{k-1}) / h^2 + gamma_k (x_{k+1} - x_k) / h + x_k
//!     = prox_{lambda f}(x_k - lambda grad g(x_k))
//! ```
//!
//! The two starting points are positions; `x1 - x0` acts as the initial
//! momentum.

use serde::{Deserialize, Serialize};

use crate::problems::{prox_grad_residual, Objective};
use crate::{Error, Result, Vector};

/// Iterates beyond this norm abort the run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// `x_k + (x_k - x_{k-1}) / (1 + gamma h) + h^2 (prox(...) - x_k) / (1 + gamma h)`.
pub fn inertial_step_general(
    obj: &Objective,
    lambda: f64,
    gamma_k: f64,
    h_k: f64,
    xk: &Vector,
    xkm1: &Vector,
) -> Vector {
    let denom = 1.0 + gamma_k * h_k;
    let fb = obj.forward_backward(lambda, xk);
    xk + (xk - xkm1) / denom + (fb - xk) * (h_k * h_k / denom)
}

/// `h = 1` form: a relaxed proximal-gradient step plus momentum,
/// `(1 - w) x_k + w prox(...) + w (x_k - x_{k-1})` with `w = 1 / (1 + gamma_k)`.
///
/// Evaluated as `x_k + w ((prox(...) - x_k) + (x_k - x_{k-1}))`, which leaves
/// fixed points bit-for-bit unchanged.
pub fn inertial_step_unit(obj: &Objective, lambda: f64, gamma_k: f64, xk: &Vector, xkm1: &Vector) -> Vector {
    let w = 1.0 / (1.0 + gamma_k);
    let fb = obj.forward_backward(lambda, xk);
    xk + ((fb - xk) + (xk - xkm1)) * w
}

/// Preset damping schedules `k -> gamma_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSchedule {
    Constant {
        gamma: f64,
    },
    /// `gamma0 / (1 + k)^power`
    PowerDecay {
        gamma0: f64,
        power: f64,
    },
}

impl GammaSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            GammaSchedule::Constant { gamma } => gamma,
            GammaSchedule::PowerDecay { gamma0, power } => gamma0 / (1.0 + k as f64).powf(power),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateHistory {
    /// `x_0, x_1, ...`
    pub xs: Vec<Vector>,
    /// Prox-gradient residual of each entry of `xs`.
    pub residuals: Vec<f64>,
    /// `(f+g)(x_k)` for each entry of `xs`.
    pub objective_values: Vec<f64>,
    pub converged: bool,
    /// Index of the last iterate.
    pub iterations: usize,
}

impl IterateHistory {
    pub fn last(&self) -> &Vector {
        self.xs.last().expect("history holds x0 and x1")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("history holds x0 and x1")
    }
}

/// Runs the unit-step recursion until the residual at `x_k` (`k >= 1`) drops
/// to `tol` or `k` reaches `max_iter`.
pub fn run_inertial(
    obj: &Objective,
    lambda: f64,
    gamma_schedule: impl Fn(usize) -> f64,
    x0: &Vector,
    x1: &Vector,
    max_iter: usize,
    tol: f64,
) -> Result<IterateHistory> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be > 0, got {lambda}")));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tol must be >= 0, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be >= 1".into()));
    }
    for (what, x) in [("x0", x0), ("x1", x1)] {
        if x.len() != obj.dim() {
            return Err(Error::DimensionMismatch {
                what,
                expected: obj.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|xi| !xi.is_finite()) {
            return Err(Error::InvalidInput(format!("{what} is not finite")));
        }
    }

    let mut hist = IterateHistory {
        xs: Vec::new(),
        residuals: Vec::new(),
        objective_values: Vec::new(),
        converged: false,
        iterations: 1,
    };
    let record = |hist: &mut IterateHistory, x: Vector| {
        hist.residuals.push(prox_grad_residual(obj, lambda, &x));
        hist.objective_values.push(obj.value(&x));
        hist.xs.push(x);
    };
    record(&mut hist, x0.clone());
    record(&mut hist, x1.clone());

    for k in 1..=max_iter {
        if hist.final_residual() <= tol {
            hist.converged = true;
            break;
        }
        if k == max_iter {
            break;
        }
        let gamma_k = gamma_schedule(k);
        if !(gamma_k > 0.0 && gamma_k.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma_{k} must be > 0, got {gamma_k}")));
        }
        let next = inertial_step_unit(obj, lambda, gamma_k, &hist.xs[k], &hist.xs[k - 1]);
        let norm = next.norm();
        if !(norm <= DIVERGENCE_THRESHOLD) {
            return Err(Error::Diverged { index: k + 1, norm });
        }
        record(&mut hist, next);
        hist.iterations = k + 1;
    }
    Ok(hist)
}
