//! Tail integral `sigma(t) = int_t^inf (|x'| + |x''|)` and empirical decay
//! classification.
//!
//! The Lojasiewicz exponent `theta` of the regularized function decides the
//! regime: `theta = 1/2` gives `|x(t) - x_bar| <= a1 exp(-a2 t)`,
//! `theta in (1/2, 1)` gives `(a3 t + a4)^{-q}` with
//! `q = (1 - theta) / (2 theta - 1)`, and `theta < 1/2` gives convergence in
//! finite time.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::{Error, Result, Vector};

/// Fraction of `t_end` where fit windows stop by default.
pub const DEFAULT_WINDOW_END: f64 = 0.9;
/// Relative distance below which the trajectory counts as arrived.
pub const FINITE_TIME_THRESHOLD: f64 = 1e-12;
/// Fits with `r^2` below this are not trusted.
pub const MIN_R_SQUARED: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTrace {
    pub times: Vec<f64>,
    pub sigma: Vec<f64>,
    /// The integrand had not decayed to `1e-8` of its initial value at
    /// `t_end`, so truncating the tail is not negligible.
    pub approximate: bool,
}

/// Trapezoid rule from each sample to `t_end`.
pub fn sigma_estimate(traj: &Trajectory) -> Result<SigmaTrace> {
    let n = traj.len();
    if n < 2 {
        return Err(Error::TooFewSamples(format!("sigma needs >= 2 samples, got {n}")));
    }
    let speed: Vec<f64> = (0..n).map(|i| traj.speed(i)).collect();
    let mut sigma = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let dt = traj.times[i + 1] - traj.times[i];
        sigma[i] = sigma[i + 1] + 0.5 * dt * (speed[i] + speed[i + 1]);
    }
    Ok(SigmaTrace {
        times: traj.times.clone(),
        sigma,
        approximate: speed[n - 1] > 1e-8 * speed[0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub tolerance: f64,
    /// Samples with `|x(t) - x_bar| > sigma(t) + tolerance`.
    pub distance_violations: Vec<usize>,
    /// Samples with `|x'(t)| > sigma(t) + tolerance`.
    pub velocity_violations: Vec<usize>,
}

impl DominanceReport {
    pub fn is_clean(&self) -> bool {
        self.distance_violations.is_empty() && self.velocity_violations.is_empty()
    }
}

/// Checks `sigma(t) >= |x(t) - x_bar|` and `sigma(t) >= |x'(t)|`.
///
/// The tolerance covers the truncated tail (`|x'(t_end)|` plus
/// `|x(t_end) - x_bar|`), the trapezoid error `dt/12 sum |second difference|`
/// and `1e-12` relative rounding.
pub fn sigma_dominance_check(traj: &Trajectory, sigma: &SigmaTrace, x_limit: &Vector) -> DominanceReport {
    let n = traj.len();
    let speed: Vec<f64> = (0..n).map(|i| traj.speed(i)).collect();
    let mut quad = 0.0;
    for i in 1..n.saturating_sub(1) {
        let dt = traj.times[i + 1] - traj.times[i];
        quad += dt / 12.0 * (speed[i + 1] - 2.0 * speed[i] + speed[i - 1]).abs();
    }
    let tail = traj.vs[n - 1].norm() + (&traj.xs[n - 1] - x_limit).norm();
    let tolerance = tail + quad + 1e-12 * (1.0 + sigma.sigma[0]);
    DominanceReport {
        tolerance,
        distance_violations: (0..n)
            .filter(|&i| (&traj.xs[i] - x_limit).norm() > sigma.sigma[i] + tolerance)
            .collect(),
        velocity_violations: (0..n)
            .filter(|&i| traj.vs[i].norm() > sigma.sigma[i] + tolerance)
            .collect(),
    }
}

/// Closed time interval used by the fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub start: f64,
    pub end: f64,
}

impl FitWindow {
    /// `[t0, 0.9 t_end]`
    pub fn from_t0(traj: &Trajectory, t0: f64) -> Self {
        Self {
            start: t0,
            end: DEFAULT_WINDOW_END * traj.t_end(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub a1: f64,
    pub a2: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    pub a3: f64,
    pub a4: f64,
    /// Time shift with `a4 = a3 t_ref`.
    pub t_ref: f64,
    /// Decay exponent `(1 - theta) / (2 theta - 1)`.
    pub q: f64,
    pub theta: f64,
    pub r_squared: f64,
}

/// `theta = (1 + q) / (1 + 2q)`, the inverse of `q = (1 - theta) / (2 theta - 1)`.
pub fn theta_from_q(q: f64) -> f64 {
    (1.0 + q) / (1.0 + 2.0 * q)
}

pub fn q_from_theta(theta: f64) -> f64 {
    (1.0 - theta) / (2.0 * theta - 1.0)
}

struct LineFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 0.0 };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

/// `(t, |x(t) - x_limit|)` in the window with distance above the noise floor.
fn window_samples(traj: &Trajectory, x_limit: &Vector, window: FitWindow) -> Result<(Vec<f64>, Vec<f64>)> {
    if x_limit.len() != traj.dim() {
        return Err(Error::DimensionMismatch {
            what: "x_limit",
            expected: traj.dim(),
            got: x_limit.len(),
        });
    }
    let dist: Vec<f64> = traj.xs.iter().map(|x| (x - x_limit).norm()).collect();
    let scale = dist.iter().copied().fold(0.0, f64::max);
    let floor = (FINITE_TIME_THRESHOLD * scale).max(1e-14);
    let (mut ts, mut ds) = (Vec::new(), Vec::new());
    for (&t, &d) in traj.times.iter().zip(&dist) {
        if t >= window.start && t <= window.end && d > floor {
            ts.push(t);
            ds.push(d);
        }
    }
    if ts.len() < 5 {
        return Err(Error::TooFewSamples(format!(
            "{} usable samples in [{}, {}], need 5",
            ts.len(),
            window.start,
            window.end
        )));
    }
    Ok((ts, ds))
}

/// Least squares on `(t, log d)` over `[t0, 0.9 t_end]`.
pub fn fit_exponential(traj: &Trajectory, x_limit: &Vector, t0: f64) -> Result<ExponentialFit> {
    fit_exponential_in(traj, x_limit, FitWindow::from_t0(traj, t0))
}

pub fn fit_exponential_in(traj: &Trajectory, x_limit: &Vector, window: FitWindow) -> Result<ExponentialFit> {
    let (ts, ds) = window_samples(traj, x_limit, window)?;
    let logs: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let line = fit_line(&ts, &logs);
    Ok(ExponentialFit {
        a1: line.intercept.exp(),
        a2: -line.slope,
        r_squared: line.r_squared,
    })
}

/// Least squares on `(log(t + t_ref), log d)` over `[t0, 0.9 t_end]`.
pub fn fit_polynomial(traj: &Trajectory, x_limit: &Vector, t0: f64) -> Result<PolynomialFit> {
    fit_polynomial_in(traj, x_limit, FitWindow::from_t0(traj, t0))
}

/// The shift `t_ref` is chosen in `[0, window end]` to maximize `r^2`
/// (log-spaced scan, then golden-section refinement); `t_ref = 0` is the
/// plain log-log fit.
pub fn fit_polynomial_in(traj: &Trajectory, x_limit: &Vector, window: FitWindow) -> Result<PolynomialFit> {
    let (ts, ds) = window_samples(traj, x_limit, window)?;
    let logs: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let t_lo = ts[0];
    let t_hi = *ts.last().expect("at least 5 samples");
    let fit_at = |shift: f64| {
        let xs: Vec<f64> = ts.iter().map(|t| (t + shift).ln()).collect();
        fit_line(&xs, &logs)
    };

    let span = (t_hi - t_lo).max(f64::MIN_POSITIVE);
    let mut shifts = Vec::with_capacity(82);
    if t_lo > 0.0 {
        shifts.push(0.0);
    }
    let (lo, hi) = (1e-6 * span, t_hi.max(span));
    for k in 0..=80 {
        shifts.push(lo * (hi / lo).powf(k as f64 / 80.0));
    }
    let score = |s: f64| fit_at(s).r_squared;
    let (best_k, _) = shifts
        .iter()
        .enumerate()
        .map(|(k, &s)| (k, score(s)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut a = shifts[best_k.saturating_sub(1)];
    let mut b = shifts[(best_k + 1).min(shifts.len() - 1)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (score(c), score(d));
    for _ in 0..100 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = score(d);
        }
    }
    let mut t_ref = 0.5 * (a + b);
    if score(shifts[best_k]) > score(t_ref) {
        t_ref = shifts[best_k];
    }

    let line = fit_at(t_ref);
    let q = -line.slope;
    if !(q > 0.0) {
        return Err(Error::FitRejected(format!("non-decaying power law, exponent {q}")));
    }
    let a3 = (-line.intercept / q).exp();
    Ok(PolynomialFit {
        a3,
        a4: a3 * t_ref,
        t_ref,
        q,
        theta: theta_from_q(q),
        r_squared: line.r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FiniteTime,
    Exponential,
    Polynomial,
    Undetermined,
}

/// `r^2` of each candidate fit; absent when the fit was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitQuality {
    pub exponential: Option<f64>,
    pub polynomial: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub regime: Regime,
    /// Implied Lojasiewicz exponent: `1/2` for exponential decay, the fitted
    /// value for polynomial decay, absent otherwise.
    pub theta: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub a3: Option<f64>,
    pub a4: Option<f64>,
    pub t_ref: Option<f64>,
    /// First time from which the distance stays below the finite-time threshold.
    pub t_finite: Option<f64>,
    pub fit_quality: FitQuality,
    pub t0: f64,
    pub window_end: f64,
    pub x_limit: Vec<f64>,
    pub a4_convention: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateOptions {
    /// Defaults to the final sample.
    pub x_limit: Option<Vector>,
    /// Defaults to [`default_t0`].
    pub t0: Option<f64>,
    /// Final `|x'| + |x''|` must be at most `converged_tol (1 + max |x'| + |x''|)`.
    pub converged_tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            x_limit: None,
            t0: None,
            converged_tol: 1e-6,
        }
    }
}

/// First sample time where `|x'| + |x''|` drops below `1e-2` of its initial
/// value.
pub fn default_t0(traj: &Trajectory) -> f64 {
    let s0 = traj.speed(0);
    (0..traj.len())
        .find(|&i| traj.speed(i) <= 1e-2 * s0)
        .map_or(traj.t_end(), |i| traj.times[i])
}

pub fn classify_rate(traj: &Trajectory, opts: &RateOptions) -> Result<RateReport> {
    if traj.len() < 2 {
        return Err(Error::TooFewSamples(format!("need >= 2 samples, got {}", traj.len())));
    }
    let n = traj.len();
    let max_speed = (0..n).map(|i| traj.speed(i)).fold(0.0, f64::max);
    let final_speed = traj.speed(n - 1);
    if !(final_speed <= opts.converged_tol * (1.0 + max_speed)) {
        return Err(Error::NotConverged {
            measure: final_speed,
            tol: opts.converged_tol * (1.0 + max_speed),
        });
    }
    let x_limit = opts.x_limit.clone().unwrap_or_else(|| traj.xs[n - 1].clone());
    if x_limit.len() != traj.dim() {
        return Err(Error::DimensionMismatch {
            what: "x_limit",
            expected: traj.dim(),
            got: x_limit.len(),
        });
    }
    let t0 = opts.t0.unwrap_or_else(|| default_t0(traj));
    let window = FitWindow::from_t0(traj, t0);
    let mut report = RateReport {
        regime: Regime::Undetermined,
        theta: None,
        a1: None,
        a2: None,
        a3: None,
        a4: None,
        t_ref: None,
        t_finite: None,
        fit_quality: FitQuality::default(),
        t0,
        window_end: window.end,
        x_limit: x_limit.iter().copied().collect(),
        a4_convention: "a4 = a3 * t_ref".into(),
    };

    let dist: Vec<f64> = traj.xs.iter().map(|x| (x - &x_limit).norm()).collect();
    let scale = dist.iter().copied().fold(0.0, f64::max);
    let arrived = dist
        .iter()
        .rposition(|&d| d > FINITE_TIME_THRESHOLD * scale)
        .map_or(0, |i| i + 1);
    if arrived < n - 1 && traj.times[arrived] <= window.end {
        report.regime = Regime::FiniteTime;
        report.t_finite = Some(traj.times[arrived]);
        return Ok(report);
    }

    let exp = fit_exponential_in(traj, &x_limit, window).ok().filter(|f| f.a2 > 0.0);
    let poly = fit_polynomial_in(traj, &x_limit, window).ok();
    report.fit_quality = FitQuality {
        exponential: exp.map(|f| f.r_squared),
        polynomial: poly.map(|f| f.r_squared),
    };
    let r_exp = exp.map_or(f64::NEG_INFINITY, |f| f.r_squared);
    let r_poly = poly.map_or(f64::NEG_INFINITY, |f| f.r_squared);
    if r_exp.max(r_poly) < MIN_R_SQUARED {
        return Ok(report);
    }
    if r_exp >= r_poly {
        let f = exp.expect("finite r^2 implies a fit");
        report.regime = Regime::Exponential;
        report.theta = Some(0.5);
        report.a1 = Some(f.a1);
        report.a2 = Some(f.a2);
    } else {
        let f = poly.expect("finite r^2 implies a fit");
        report.regime = Regime::Polynomial;
        report.theta = Some(f.theta);
        report.a3 = Some(f.a3);
        report.a4 = Some(f.a4);
        report.t_ref = Some(f.t_ref);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaOdeSample {
    pub index: usize,
    pub t: f64,
    pub sigma_dot: f64,
    /// `-alpha sigma^{theta / (1 - theta)}`
    pub bound: f64,
    pub tolerance: f64,
}

/// Samples violating `sigma' <= -alpha sigma^{theta/(1-theta)}`, with `sigma'`
/// from central differences and tolerance
/// `dt^2/6 |sigma'''| + 1e-12 sigma` (`sigma'''` from a five-point stencil).
pub fn sigma_ode_check(sigma: &SigmaTrace, theta: f64, alpha: f64) -> Result<Vec<SigmaOdeSample>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be > 0, got {alpha}")));
    }
    let (t, s) = (&sigma.times, &sigma.sigma);
    let n = s.len();
    if n < 5 {
        return Err(Error::TooFewSamples(format!(
            "sigma ODE check needs >= 5 samples, got {n}"
        )));
    }
    let power = theta / (1.0 - theta);
    let mut out = Vec::new();
    for i in 2..n - 2 {
        if !(s[i] > 0.0) {
            continue;
        }
        let dt = 0.5 * (t[i + 1] - t[i - 1]);
        let sigma_dot = (s[i + 1] - s[i - 1]) / (2.0 * dt);
        let third = (s[i + 2] - 2.0 * s[i + 1] + 2.0 * s[i - 1] - s[i - 2]) / (2.0 * dt.powi(3));
        let tolerance = dt * dt / 6.0 * third.abs() + 1e-12 * s[i];
        let bound = -alpha * s[i].powf(power);
        if sigma_dot > bound + tolerance {
            out.push(SigmaOdeSample {
                index: i,
                t: t[i],
                sigma_dot,
                bound,
                tolerance,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    /// One-dimensional trace with `x = d(t)` and `|x'| + |x''| = speed(t)`.
    fn synthetic(ts: &[f64], d: impl Fn(f64) -> f64, dd: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory::from_samples(
            ts.to_vec(),
            ts.iter().map(|&t| dvector![d(t)]).collect(),
            ts.iter().map(|&t| dvector![dd(t)]).collect(),
            ts.iter().map(|_| dvector![0.0]).collect(),
        )
        .unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn theta_inversion() {
        assert!((theta_from_q(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((theta_from_q(3.0) - 4.0 / 7.0).abs() < 1e-15);
        let t = theta_from_q(100.0);
        assert!(t > 0.5 && t < 0.51);
        for theta in [0.55, 0.6, 0.75, 0.9] {
            assert!((theta_from_q(q_from_theta(theta)) - theta).abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_exact() {
        let ts = grid(0.0, 10.0, 1001);
        let traj = synthetic(&ts, |t| 3.0 * (-2.0 * t).exp(), |t| -6.0 * (-2.0 * t).exp());
        let fit = fit_exponential_in(&traj, &dvector![0.0], FitWindow { start: 0.0, end: 10.0 }).unwrap();
        assert!((fit.a1 - 3.0).abs() < 1e-10);
        assert!((fit.a2 - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_distance_has_zero_slope() {
        let ts = grid(0.0, 10.0, 101);
        let traj = synthetic(&ts, |_| 1.0, |_| 0.0);
        let fit = fit_exponential_in(&traj, &dvector![0.0], FitWindow { start: 0.0, end: 10.0 }).unwrap();
        assert_eq!(fit.a2, 0.0);
        assert!(fit_polynomial_in(&traj, &dvector![0.0], FitWindow { start: 0.0, end: 10.0 }).is_err());
    }

    #[test]
    fn power_laws() {
        let ts = grid(1.0, 100.0, 2000);
        for (q, theta) in [(1.0, 2.0 / 3.0), (3.0, 4.0 / 7.0)] {
            let traj = synthetic(&ts, |t| t.powf(-q), |t| -q * t.powf(-q - 1.0));
            let fit = fit_polynomial_in(&traj, &dvector![0.0], FitWindow { start: 1.0, end: 100.0 }).unwrap();
            assert!((fit.q - q).abs() < 1e-6, "q {}", fit.q);
            assert!((fit.theta - theta).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_samples() {
        let ts = grid(0.0, 1.0, 4);
        let traj = synthetic(&ts, |t| (-t).exp(), |t| -(-t).exp());
        assert!(matches!(
            fit_exponential(&traj, &dvector![0.0], 0.0),
            Err(Error::TooFewSamples(_))
        ));
    }

    #[test]
    fn sigma_of_exponential_speed() {
        let ts = grid(0.0, 20.0, 20_001);
        let traj = synthetic(&ts, |t| -(-t).exp(), |t| (-t).exp());
        let s = sigma_estimate(&traj).unwrap();
        for (t, sig) in s.times.iter().zip(&s.sigma) {
            if *t <= 10.0 {
                let exact = (-t).exp() - (-20f64).exp();
                assert!(((sig - exact) / exact).abs() < 1e-5);
            }
        }
        assert!(s.sigma.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sigma_ode_examples() {
        let ts = grid(0.0, 10.0, 1001);
        let exp = SigmaTrace {
            times: ts.clone(),
            sigma: ts.iter().map(|t| (-t).exp()).collect(),
            approximate: false,
        };
        assert!(sigma_ode_check(&exp, 0.5, 1.0).unwrap().is_empty());
        // -sigma <= -sigma^2 while sigma <= 1: a faster decay never violates
        assert!(sigma_ode_check(&exp, 2.0 / 3.0, 1.0).unwrap().is_empty());

        let inv = SigmaTrace {
            times: ts.clone(),
            sigma: ts.iter().map(|t| 1.0 / (1.0 + t)).collect(),
            approximate: false,
        };
        assert!(sigma_ode_check(&inv, 2.0 / 3.0, 1.0).unwrap().is_empty());
        assert!(!sigma_ode_check(&inv, 2.0 / 3.0, 1.5).unwrap().is_empty());
        // a power law checked against the exponential regime fails once sigma < alpha
        let wrong = sigma_ode_check(&inv, 0.5, 0.5).unwrap();
        assert!(!wrong.is_empty());
        assert!(wrong.iter().all(|v| v.t > 1.0));
    }

    #[test]
    fn equilibrium_is_finite_time() {
        let ts = grid(0.0, 10.0, 101);
        let traj = synthetic(&ts, |_| 0.5, |_| 0.0);
        let s = sigma_estimate(&traj).unwrap();
        assert!(s.sigma.iter().all(|&x| x == 0.0));
        assert!(!s.approximate);
        let report = classify_rate(&traj, &RateOptions::default()).unwrap();
        assert_eq!(report.regime, Regime::FiniteTime);
        assert_eq!(report.t_finite, Some(0.0));
        assert_eq!(report.a1, None);
    }

    #[test]
    fn not_converged_is_rejected() {
        let ts = grid(0.0, 10.0, 101);
        let traj = synthetic(&ts, |t| t, |_| 1.0);
        assert!(matches!(
            classify_rate(&traj, &RateOptions::default()),
            Err(Error::NotConverged { .. })
        ));
    }
}
