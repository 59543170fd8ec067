//! Derived constants of the flow and the dissipation conditions.
//!
//! All constants depend on `(gamma, lambda, beta)` only; `L1` and `L2`
//! depend on `lambda` and `beta` through the product `lambda * beta`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `sqrt(max((g+1)^2, (g+2)((1+lb)^2+1)))`, a Lipschitz constant of the
/// first-order vector field.
pub fn lipschitz_l1(gamma: f64, lambda_beta: f64) -> f64 {
    let a = (gamma + 1.0).powi(2);
    let b = (gamma + 2.0) * ((1.0 + lambda_beta).powi(2) + 1.0);
    a.max(b).sqrt()
}

/// `sqrt(max((g+1)^2 + g lb, (2+lb)^2 + g(2+lb)))`; the second branch wins
/// whenever `gamma <= sqrt(3)`.
pub fn lipschitz_l2(gamma: f64, lambda_beta: f64) -> f64 {
    let a = (gamma + 1.0).powi(2) + gamma * lambda_beta;
    let t = 2.0 + lambda_beta;
    let b = t * t + gamma * t;
    a.max(b).sqrt()
}

/// `(gamma, lambda)` with every constant derived from them and `beta`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub gamma: f64,
    pub lambda: f64,
    pub beta: f64,
    pub L1: f64,
    pub L2: f64,
    /// `min(L1, L2)`
    pub L: f64,
    pub A: f64,
    pub B: f64,
    pub C: f64,
    /// `L^2 / (L^2 + 1)`, in (0, 1).
    pub c: f64,
    #[serde(rename = "a")]
    pub a_const: f64,
    #[serde(rename = "b")]
    pub b_const: f64,
    /// `beta + 1/lambda`
    pub s: f64,
    /// `(beta lambda gamma + (3 - 2c) gamma - C) / lambda`
    pub p: f64,
    /// `A < 0 && B < 0 && C < 0`, evaluated strictly.
    pub rho_feasible: bool,
    pub corollary_feasible: bool,
}

impl SystemParams {
    pub fn lambda_beta(&self) -> f64 {
        self.lambda * self.beta
    }

    /// Closed form of `B - A`: `(gamma / 2 lambda)(1 - 1/L^2 - gamma lambda beta)`.
    pub fn b_minus_a(&self) -> f64 {
        let l2 = self.L * self.L;
        self.gamma / (2.0 * self.lambda) * (1.0 - 1.0 / l2 - self.gamma * self.lambda * self.beta)
    }
}

fn check_inputs(gamma: f64, lambda: f64, beta: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be > 0, got {gamma}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be > 0, got {lambda}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta must be >= 0, got {beta}")));
    }
    Ok(())
}

#[allow(non_snake_case)]
pub fn derive_params(gamma: f64, lambda: f64, beta: f64) -> Result<SystemParams> {
    check_inputs(gamma, lambda, beta)?;
    let lb = lambda * beta;
    let L1 = lipschitz_l1(gamma, lb);
    let L2 = lipschitz_l2(gamma, lb);
    let L = L1.min(L2);
    let l2 = L * L;
    let g2 = gamma * gamma;

    let A = -0.5 * gamma / lambda + 0.5 * beta * (l2 + 2.0 * g2 + 1.0);
    let B = -0.5 * gamma / (lambda * l2) + 0.5 * beta * (l2 + g2 + 1.0);
    let C = -(2.0 * l2 + 1.0) / ((l2 + 1.0) * (l2 + 1.0)) * g2 + 3.0 * beta * gamma * lambda - 1.0;

    let c = l2 / (l2 + 1.0);
    let a_const = gamma / (2.0 * (l2 + 1.0) * l2 * lambda);
    let b_const = l2 * gamma / (2.0 * (l2 + 1.0) * lambda);
    let s = beta + 1.0 / lambda;
    let p = (beta * lambda * gamma + (3.0 - 2.0 * c) * gamma - C) / lambda;

    Ok(SystemParams {
        gamma,
        lambda,
        beta,
        L1,
        L2,
        L,
        A,
        B,
        C,
        c,
        a_const,
        b_const,
        s,
        p,
        rho_feasible: A < 0.0 && B < 0.0 && C < 0.0,
        corollary_feasible: corollary_check(gamma, lambda, beta),
    })
}

/// Sufficient condition for the dissipation conditions:
/// `gamma <= sqrt(3)` and `-gamma/(lambda q) + beta (q + gamma^2 + 1) < 0`
/// with `q = (2 + lambda beta)^2 + gamma (2 + lambda beta)`.
pub fn corollary_check(gamma: f64, lambda: f64, beta: f64) -> bool {
    if !(gamma > 0.0 && gamma <= 3f64.sqrt() && lambda > 0.0 && beta >= 0.0) {
        return false;
    }
    let t = 2.0 + lambda * beta;
    let q = t * t + gamma * t;
    -gamma / (lambda * q) + beta * (q + gamma * gamma + 1.0) < 0.0
}

/// Feasible grid points in row-major `(gamma, lambda)` order.
pub fn feasible_region(beta: f64, gamma_grid: &[f64], lambda_grid: &[f64]) -> Result<Vec<(f64, f64, SystemParams)>> {
    if gamma_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::InvalidInput("grids must be nonempty".into()));
    }
    let mut out = Vec::new();
    for &gamma in gamma_grid {
        for &lambda in lambda_grid {
            let params = derive_params(gamma, lambda, beta)?;
            if params.rho_feasible {
                out.push((gamma, lambda, params));
            }
        }
    }
    Ok(out)
}

/// Constants of the decay envelope `A|v|^2 + B|w|^2 <= m (s|w| + p|v|)(|v| + |w|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEnvelope {
    pub m: f64,
    pub r0: f64,
}

/// `(A + B r^2) / (p + (s + p) r + s r^2)`.
pub fn envelope_fn(params: &SystemParams, r: f64) -> f64 {
    let (s, p) = (params.s, params.p);
    (params.A + params.B * r * r) / (p + (s + p) * r + s * r * r)
}

/// `r0` maximizes [`envelope_fn`] on `[0, inf)` and `m = max(B/s, g(r0))`.
#[allow(non_snake_case)]
pub fn rate_envelope_constants(params: &SystemParams) -> Result<RateEnvelope> {
    let SystemParams { A, B, C, s, p, .. } = *params;
    if !params.rho_feasible {
        return Err(Error::Infeasible { a: A, b: B, c: C });
    }
    envelope_from(A, B, s, p)
}

#[allow(non_snake_case)]
pub(crate) fn envelope_from(A: f64, B: f64, s: f64, p: f64) -> Result<RateEnvelope> {
    if !(A < 0.0 && B < 0.0 && s > 0.0 && p > 0.0) {
        return Err(Error::InvalidInput(format!(
            "envelope requires A, B < 0 and s, p > 0 (A={A}, B={B}, s={s}, p={p})"
        )));
    }
    let k = s * A - p * B;
    let disc = k * k + (s + p) * (s + p) * A * B;
    let r0 = (k - disc.sqrt()) / ((s + p) * B);
    let g = |r: f64| (A + B * r * r) / (p + (s + p) * r + s * r * r);
    Ok(RateEnvelope {
        m: (B / s).max(g(r0)),
        r0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(lipschitz_l1(2.0, 0.1), 3.0, epsilon = 1e-12);
        assert_relative_eq!(lipschitz_l2(2.0, 0.1), 9.2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(lipschitz_l1(2.0, 1.0), 20f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(lipschitz_l2(2.0, 1.0), 15f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn hand_evaluated_lipschitz() {
        assert_relative_eq!(lipschitz_l1(1.0, 0.0), 6f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(lipschitz_l2(1.0, 0.03), (2.03f64 * 2.03 + 2.03).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn zero_beta_is_feasible() {
        let p = derive_params(0.7, 3.0, 0.0).unwrap();
        assert!(p.rho_feasible && p.corollary_feasible);
        assert_relative_eq!(p.A, -0.7 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn worked_example_feasible() {
        // L = L2 with L^2 = 2.015^2 + 2.015
        let p = derive_params(1.0, 0.005, 3.0).unwrap();
        let l2 = 2.015f64 * 2.015 + 2.015;
        assert_relative_eq!(p.L * p.L, l2, epsilon = 1e-12);
        assert_eq!(p.L, p.L2);
        assert_relative_eq!(p.A, -100.0 + 1.5 * (l2 + 3.0), epsilon = 1e-10);
        assert_relative_eq!(p.B, -100.0 / l2 + 1.5 * (l2 + 2.0), epsilon = 1e-10);
        assert_relative_eq!(
            p.C,
            -(2.0 * l2 + 1.0) / ((l2 + 1.0) * (l2 + 1.0)) + 0.045 - 1.0,
            epsilon = 1e-12
        );
        assert!((p.A - -86.387).abs() < 1e-3);
        assert!((p.B - -4.348).abs() < 1e-3);
        assert!((p.C - -1.218).abs() < 1e-3);
        assert!(p.rho_feasible);
        assert!(p.corollary_feasible);
    }

    #[test]
    fn worked_example_infeasible() {
        let p = derive_params(1.0, 1.0, 3.0).unwrap();
        assert!(p.A > 0.0);
        assert!(!p.rho_feasible);
        assert!(!corollary_check(2.0, 1e-6, 0.0));
        assert!(corollary_check(1.0, 1.0, 0.0));
    }

    #[test]
    fn product_constraint_and_difference() {
        let p = derive_params(0.4, 0.01, 2.0).unwrap();
        let target = p.gamma.powi(2) * (1.0 - p.c).powi(2) / (4.0 * p.lambda.powi(2));
        assert_relative_eq!(p.a_const * p.b_const, target, max_relative = 1e-12);
        assert_relative_eq!(p.B - p.A, p.b_minus_a(), max_relative = 1e-12);
    }

    #[test]
    fn envelope_unit_example() {
        let env = envelope_from(-1.0, -1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(env.r0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(env.m, -0.5, epsilon = 1e-15);
        // scan oracle
        let scan = (0..=10_000)
            .map(|i| {
                let r = i as f64 * 1e-3;
                -(1.0 + r * r) / (1.0 + 2.0 * r + r * r)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(scan, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn envelope_rejects_infeasible() {
        let p = derive_params(1.0, 1.0, 3.0).unwrap();
        assert!(matches!(rate_envelope_constants(&p), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn invalid_inputs() {
        assert!(derive_params(0.0, 1.0, 1.0).is_err());
        assert!(derive_params(1.0, -1.0, 1.0).is_err());
        assert!(derive_params(1.0, 1.0, f64::NAN).is_err());
        assert!(feasible_region(1.0, &[], &[1.0]).is_err());
    }

    #[test]
    fn json_keys() {
        let p = derive_params(1.0, 0.005, 3.0).unwrap();
        let v = serde_json::to_value(p).unwrap();
        for k in [
            "gamma",
            "lambda",
            "beta",
            "L1",
            "L2",
            "L",
            "A",
            "B",
            "C",
            "c",
            "a",
            "b",
            "s",
            "p",
            "rho_feasible",
            "corollary_feasible",
        ] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
    }
}
