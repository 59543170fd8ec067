//! Energy functional, the regularized function `H` and the checks built on
//! them.
//!
//! With `z = x'' + gamma x' + x = prox_{lambda f}(x - lambda grad g(x))` the
//! energy is
//!
//! ```text
//! E = (f+g)(z) + |x'' + c gamma x'|^2 / (2 lambda) - C |x'|^2 / (2 lambda)
//! ```
//!
//! and `E = H(z, (1-c) gamma x' + x, x')` with
//! `H(u, v, w) = (f+g)(u) + |u - v|^2 / (2 lambda) - C |w|^2 / (2 lambda)`.
//! Under the dissipation conditions `E' <= A|x'|^2 + B|x''|^2 <= 0`.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::params::{rate_envelope_constants, SystemParams};
use crate::problems::Objective;
use crate::{Error, Result, Vector};

/// Energy at a state; `x + gamma v + acc` must lie in `dom f`.
///
/// Rebuilding `z` from `acc` can leave it a rounding error outside a box;
/// such points are projected back (the box prox is the projection for every
/// `lambda`). Anything farther out is rejected.
pub fn energy_at(obj: &Objective, params: &SystemParams, x: &Vector, v: &Vector, acc: &Vector) -> Result<f64> {
    let mut z = acc + v * params.gamma + x;
    if !obj.f().in_domain(&z) {
        let p = obj.f().prox(params.lambda, &z);
        if (&p - &z).norm() > 1e-12 * (1.0 + z.norm()) {
            return Err(Error::OutsideDomain);
        }
        z = p;
    }
    let lambda = params.lambda;
    let mix = acc + v * (params.c * params.gamma);
    Ok(obj.value(&z) + mix.norm_squared() / (2.0 * lambda) - params.C * v.norm_squared() / (2.0 * lambda))
}

/// `H(u, v, w)`; infinite when `u` is outside `dom f`.
pub fn h_value(obj: &Objective, params: &SystemParams, u: &Vector, v: &Vector, w: &Vector) -> f64 {
    let fg = obj.value(u);
    if fg.is_infinite() {
        return fg;
    }
    fg + (u - v).norm_squared() / (2.0 * params.lambda) - params.C * w.norm_squared() / (2.0 * params.lambda)
}

/// `dist(0, dH(u, v, w))` from the product formula
/// `dH = (d(f+g)(u) + (u-v)/lambda) x {-(u-v)/lambda} x {-C w/lambda}`.
pub fn h_subdiff_distance(obj: &Objective, params: &SystemParams, u: &Vector, v: &Vector, w: &Vector) -> f64 {
    let diff = (u - v) / params.lambda;
    let q = obj.g().grad(u) + &diff;
    let first = obj.f().subdiff_distance(u, &q);
    let rest = diff.norm_squared() + (w * (params.C / params.lambda)).norm_squared();
    (first * first + rest).sqrt()
}

/// `(beta + 1/lambda)|acc| + ((beta lambda gamma + (2a + 1) gamma - C) / lambda)|v|`.
pub fn w_bound(params: &SystemParams, v: &Vector, acc: &Vector, a: f64) -> f64 {
    let SystemParams {
        beta, lambda, gamma, C, ..
    } = *params;
    (beta + 1.0 / lambda) * acc.norm() + (beta * lambda * gamma + (2.0 * a + 1.0) * gamma - C) / lambda * v.norm()
}

/// Element of `dH(z, a gamma v + x, v)`, returned as its three blocks.
pub fn subgradient_element(
    obj: &Objective,
    params: &SystemParams,
    x: &Vector,
    v: &Vector,
    acc: &Vector,
    a: f64,
) -> [Vector; 3] {
    let SystemParams { lambda, gamma, C, .. } = *params;
    let z = acc + v * gamma + x;
    let g = obj.g();
    [
        g.grad(&z) - g.grad(x) - v * (a * gamma / lambda),
        -(acc + v * ((1.0 - a) * gamma)) / lambda,
        v * (-C / lambda),
    ]
}

pub fn subgradient_norm(blocks: &[Vector; 3]) -> f64 {
    blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

/// Per-sample energy quantities along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `(f+g)(z)`
    pub fg_shifted: Vec<f64>,
    /// `H(z, (1-c) gamma v + x, v)`
    pub h_value: Vec<f64>,
    /// [`w_bound`] with `a = 1 - c`.
    pub w_bound: Vec<f64>,
    /// Prox-gradient residual at `x`.
    pub residual: Vec<f64>,
    /// `A|v|^2 + B|acc|^2`
    pub dissipation: Vec<f64>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Evaluates the energy quantities at every sample. The acceleration is
/// recomputed from the state, so `z` is a prox output and lies in `dom f`.
pub fn monitor(obj: &Objective, params: &SystemParams, traj: &Trajectory) -> Result<EnergyTrace> {
    if traj.is_empty() {
        return Err(Error::TooFewSamples("empty trajectory".into()));
    }
    if traj.dim() != obj.dim() {
        return Err(Error::DimensionMismatch {
            what: "trajectory",
            expected: obj.dim(),
            got: traj.dim(),
        });
    }
    let n = traj.len();
    let mut trace = EnergyTrace {
        times: traj.times.clone(),
        energy: Vec::with_capacity(n),
        fg_shifted: Vec::with_capacity(n),
        h_value: Vec::with_capacity(n),
        w_bound: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
        dissipation: Vec::with_capacity(n),
    };
    let (gamma, lambda, c) = (params.gamma, params.lambda, params.c);
    for (x, v) in traj.xs.iter().zip(&traj.vs) {
        let z = obj.forward_backward(lambda, x);
        let acc = &z - v * gamma - x;
        let fg = obj.value(&z);
        let mix = &acc + v * (c * gamma);
        let e = fg + mix.norm_squared() / (2.0 * lambda) - params.C * v.norm_squared() / (2.0 * lambda);
        trace.energy.push(e);
        trace.fg_shifted.push(fg);
        trace
            .h_value
            .push(h_value(obj, params, &z, &(v * ((1.0 - c) * gamma) + x), v));
        trace.w_bound.push(w_bound(params, v, &acc, 1.0 - c));
        trace.residual.push((x - &z).norm() / lambda);
        trace
            .dissipation
            .push(params.A * v.norm_squared() + params.B * acc.norm_squared());
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepViolation {
    pub index: usize,
    /// `E[index + 1] - E[index]`
    pub delta: f64,
}

/// `E(t_j) - E(t_i)` exceeded `int_{t_i}^{t_j} (A|v|^2 + B|acc|^2) + tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratedViolation {
    pub i: usize,
    pub j: usize,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub violations: Vec<StepViolation>,
    pub integrated: Vec<IntegratedViolation>,
}

impl MonotoneReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.integrated.is_empty()
    }
}

/// Flags every step with `E[i+1] - E[i] > tol`, and every `j` for which some
/// `i < j` breaks the integrated dissipation bound (trapezoid rule). The
/// worst `i` is reported for each such `j`.
pub fn check_monotone(trace: &EnergyTrace, tol: f64) -> MonotoneReport {
    let e = &trace.energy;
    let violations = e
        .windows(2)
        .enumerate()
        .filter_map(|(index, w)| {
            let delta = w[1] - w[0];
            (delta > tol).then_some(StepViolation { index, delta })
        })
        .collect();

    // D_k = E_k - int_0^{t_k} diss; the bound for (i, j) is D_j - D_i <= tol
    let mut integrated = Vec::new();
    let mut cum = 0.0;
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &ek) in e.iter().enumerate() {
        if k > 0 {
            let dt = trace.times[k] - trace.times[k - 1];
            cum += 0.5 * dt * (trace.dissipation[k] + trace.dissipation[k - 1]);
        }
        let d = ek - cum;
        if k > 0 && d - best.1 > tol {
            integrated.push(IntegratedViolation {
                i: best.0,
                j: k,
                excess: d - best.1,
            });
        }
        if d > best.1 {
            best = (k, d);
        }
    }
    MonotoneReport { violations, integrated }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub tolerance: f64,
    /// Indices `i` with `(E[i+1] - E[i]) / dt > (diss[i] + diss[i+1]) / 2 + tolerance`.
    pub violations: Vec<usize>,
    pub max_excess: f64,
}

/// Difference-quotient form of `E' <= A|v|^2 + B|acc|^2`, midpoint value of
/// the right side approximated by the endpoint average; tolerance
/// `100 dt^2 (1 + max |diss|)`.
pub fn dissipation_check(trace: &EnergyTrace) -> DissipationReport {
    let scale = 1.0 + trace.dissipation.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let mut max_dt = 0.0_f64;
    let mut excess = Vec::with_capacity(trace.len().saturating_sub(1));
    for i in 0..trace.len().saturating_sub(1) {
        let dt = trace.times[i + 1] - trace.times[i];
        max_dt = max_dt.max(dt);
        let lhs = (trace.energy[i + 1] - trace.energy[i]) / dt;
        let rhs = 0.5 * (trace.dissipation[i] + trace.dissipation[i + 1]);
        excess.push(lhs - rhs);
    }
    let tolerance = 100.0 * max_dt * max_dt * scale;
    DissipationReport {
        tolerance,
        violations: (0..excess.len()).filter(|&i| excess[i] > tolerance).collect(),
        max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Indices where `A|v|^2 + B|acc|^2 <= m (s|acc| + p|v|)(|v| + |acc|)` fails
/// by more than `1e-12` relative.
pub fn envelope_check(params: &SystemParams, traj: &Trajectory) -> Result<Vec<usize>> {
    let env = rate_envelope_constants(params)?;
    let mut bad = Vec::new();
    for i in 0..traj.len() {
        let (nv, na) = (traj.vs[i].norm(), traj.accs[i].norm());
        let lhs = params.A * nv * nv + params.B * na * na;
        let rhs = env.m * (params.s * na + params.p * nv) * (nv + na);
        if lhs > rhs + 1e-12 * (lhs.abs() + rhs.abs()) {
            bad.push(i);
        }
    }
    Ok(bad)
}

/// Indices where the subgradient element exceeds [`w_bound`] for the given `a`.
pub fn w_dominance_check(obj: &Objective, params: &SystemParams, traj: &Trajectory, a: f64) -> Vec<usize> {
    (0..traj.len())
        .filter(|&i| {
            let (x, v, acc) = (&traj.xs[i], &traj.vs[i], &traj.accs[i]);
            let norm = subgradient_norm(&subgradient_element(obj, params, x, v, acc, a));
            let bound = w_bound(params, v, acc, a);
            norm > bound * (1.0 + 1e-12) + 1e-15
        })
        .collect()
}
