//! Fixtures shared by the integration suites: catalog runs and independent
//! oracles for their critical points.
#![allow(dead_code)]

use nalgebra::{dvector, DMatrix, DVector};
use proxflow::params::{derive_params, SystemParams};
use proxflow::problems::Objective;

pub type V = DVector<f64>;

/// Nonzero root of `x = 2 sin x` on `(1, 2.5)` by bisection.
pub fn cos_quad_root() -> f64 {
    let (mut lo, mut hi) = (1.0_f64, 2.5_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - 2.0 * mid.sin() < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solution of `min_x mu|x| + (x - y)^2 / 2` by case analysis on the sign
/// of `x`.
pub fn scalar_lasso_solution(y: f64, mu: f64) -> f64 {
    if y > mu {
        y - mu
    } else if y < -mu {
        y + mu
    } else {
        0.0
    }
}

pub fn zero_quad() -> Objective {
    Objective::zero_quad(DMatrix::identity(2, 2), dvector![1.0, -0.5]).unwrap()
}

pub fn lasso() -> Objective {
    Objective::lasso(DMatrix::identity(1, 1), dvector![1.0], 0.5).unwrap()
}

pub fn box_quad() -> Objective {
    Objective::box_quad(
        DMatrix::identity(2, 2),
        dvector![2.0, -0.3],
        dvector![-1.0, -1.0],
        dvector![1.0, 1.0],
    )
    .unwrap()
}

pub fn cos_quad() -> Objective {
    Objective::cos_quad(1, 0.0).unwrap()
}

/// A feasible run of the flow from a fixed start.
pub struct Run {
    pub name: &'static str,
    pub obj: Objective,
    pub params: SystemParams,
    pub u0: V,
    pub v0: V,
    /// Known critical point the run should approach.
    pub limit: V,
}

/// `(gamma, lambda beta) = (0.16, 0.0064)` sits near the fastest linear
/// decay the dissipation conditions allow.
pub fn feasible_runs() -> Vec<Run> {
    let fast = |beta: f64| derive_params(0.16, 0.0064 / beta, beta).unwrap();
    let root = cos_quad_root();
    vec![
        Run {
            name: "zero_quad",
            obj: zero_quad(),
            params: fast(1.0),
            u0: dvector![0.0, 0.0],
            v0: dvector![0.0, 0.0],
            limit: dvector![1.0, -0.5],
        },
        Run {
            name: "lasso",
            obj: lasso(),
            params: fast(1.0),
            u0: dvector![-1.0],
            v0: dvector![0.0],
            limit: dvector![scalar_lasso_solution(1.0, 0.5)],
        },
        Run {
            name: "box_quad",
            obj: box_quad(),
            params: fast(1.0),
            u0: dvector![-0.5, 0.8],
            v0: dvector![0.0, 0.0],
            limit: dvector![1.0, -0.3],
        },
        Run {
            name: "cos_quad",
            obj: cos_quad(),
            params: fast(3.0),
            u0: dvector![3.0],
            v0: dvector![0.0],
            limit: dvector![root],
        },
        Run {
            name: "cos_quad(1,0.005)",
            obj: cos_quad(),
            params: derive_params(1.0, 0.005, 3.0).unwrap(),
            u0: dvector![3.0],
            v0: dvector![0.0],
            limit: dvector![root],
        },
    ]
}

/// `x'' + x' + x/4 = 0`: double root `-1/2`.
pub fn critically_damped(u0: f64, v0: f64, t: f64) -> f64 {
    (u0 + (v0 + 0.5 * u0) * t) * (-0.5 * t).exp()
}

/// `x'' + gamma x' + k x = 0` with `gamma^2 < 4k`.
pub fn damped_oscillator(gamma: f64, k: f64, u0: f64, v0: f64, t: f64) -> f64 {
    let w = (k - 0.25 * gamma * gamma).sqrt();
    (-0.5 * gamma * t).exp() * (u0 * (w * t).cos() + (v0 + 0.5 * gamma * u0) / w * (w * t).sin())
}

/// Brute-force `argmin_y phi(y) + (y - x)^2 / (2 lambda)` over a uniform grid.
pub fn grid_argmin(phi: impl Fn(f64) -> f64, x: f64, lambda: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=n {
        let y = lo + k as f64 * step;
        let val = phi(y) + (y - x) * (y - x) / (2.0 * lambda);
        if val < best.0 {
            best = (val, y);
        }
    }
    best.1
}
