//! Second-order proximal-gradient dynamics for composite objectives `f + g`.
//!
//! The flow studied here is
//!
//! ```text
//! x''(t) + gamma x'(t) + x(t) = prox_{lambda f}(x(t) - lambda grad g(x(t)))
//! x(0) = u0, x'(0) = v0
//! ```
//!
//! where `f` is convex, lower semicontinuous and prox-friendly, and `g` is
//! smooth with a `beta`-Lipschitz gradient (possibly nonconvex).
//!
//! The crate is split along the lines of the analysis:
//!
//! * [`problems`] -- catalog of composite objectives with closed-form proxes.
//! * [`params`] -- Lipschitz constants, the dissipation conditions
//!   `A < 0, B < 0, C < 0` and every derived constant.
//! * [`dynamics`] -- first-order reformulation and a fixed-step RK4 integrator.
//! * [`lyapunov`] -- energy functional, the regularized function `H`, the
//!   subgradient bound and monotonicity checks.
//! * [`discrete`] -- the inertial proximal-gradient recursion obtained by
//!   explicit time discretization.
//! * [`rates`] -- tail integral `sigma(t)`, decay fits and regime
//!   classification in terms of the Lojasiewicz exponent.
//! * [`io`] -- CSV formats for trajectories, energy traces and iterate
//!   histories.
//!
//! ```
//! use proxflow::problems::{make_problem, ProblemSpec};
//! use proxflow::params::derive_params;
//! use proxflow::dynamics::integrate;
//! use nalgebra::DVector;
//!
//! let spec: ProblemSpec =
//!     serde_json::from_str(r#"{"name": "lasso", "dim": 1, "M": [[1.0]], "y": [1.0], "mu": 0.5}"#)
//!         .unwrap();
//! let obj = make_problem(&spec).unwrap();
//! let params = derive_params(0.16, 0.006, obj.beta()).unwrap();
//! assert!(params.rho_feasible);
//! let traj = integrate(&obj, &params, &DVector::zeros(1), &DVector::zeros(1), 1.0, 1e-3, 10)
//!     .unwrap();
//! assert_eq!(traj.len(), 101);
//! ```

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lyapunov;
pub mod params;
pub mod problems;
pub mod rates;

pub use error::{Error, Result};

/// Dense real vector used for positions, velocities and accelerations.
pub type Vector = nalgebra::DVector<f64>;
