mod common;

use common::*;
use nalgebra::{dvector, DMatrix};
use proptest::prelude::*;
use proxflow::dynamics::{integrate, Trajectory};
use proxflow::params::derive_params;
use proxflow::problems::Objective;
use proxflow::rates::{
    classify_rate, fit_exponential_in, fit_polynomial, q_from_theta, sigma_dominance_check, sigma_estimate, FitWindow,
    RateOptions, RateReport, Regime,
};

/// Scalar trace with distance `d`, velocity `d1` and acceleration `d2`.
fn synthetic(ts: &[f64], d: impl Fn(f64) -> f64, d1: impl Fn(f64) -> f64, d2: impl Fn(f64) -> f64) -> Trajectory {
    Trajectory::from_samples(
        ts.to_vec(),
        ts.iter().map(|&t| dvector![d(t)]).collect(),
        ts.iter().map(|&t| dvector![d1(t)]).collect(),
        ts.iter().map(|&t| dvector![d2(t)]).collect(),
    )
    .unwrap()
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn exact_limit() -> RateOptions {
    RateOptions {
        x_limit: Some(dvector![0.0]),
        ..RateOptions::default()
    }
}

/// `(a3 t + a4)^{-q}` on a horizon where it falls by `1e-8`, keeping the
/// tail above the finite-time floor.
fn power_law(theta: f64, a3: f64, a4: f64) -> Trajectory {
    let q = q_from_theta(theta);
    let t_end = (a4 * 10f64.powf(8.0 / q) - a4) / a3;
    let ts = grid(0.0, t_end, 10_001);
    synthetic(
        &ts,
        |t| (a3 * t + a4).powf(-q),
        |t| -q * a3 * (a3 * t + a4).powf(-q - 1.0),
        |t| q * (q + 1.0) * a3 * a3 * (a3 * t + a4).powf(-q - 2.0),
    )
}

fn populated(r: &RateReport) -> bool {
    let exp = r.a1.is_some() && r.a2.is_some();
    let poly = r.a3.is_some() && r.a4.is_some() && r.t_ref.is_some();
    match r.regime {
        Regime::Exponential => exp && !poly && r.t_finite.is_none() && r.theta == Some(0.5),
        Regime::Polynomial => poly && !exp && r.t_finite.is_none() && r.theta.is_some(),
        Regime::FiniteTime => !exp && !poly && r.t_finite.is_some(),
        Regime::Undetermined => !exp && !poly && r.t_finite.is_none() && r.theta.is_none(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponential_fit_is_exact(a1 in 0.1..10.0f64, a2 in 0.05..3.0f64) {
        let ts = grid(0.0, 20.0 / a2, 2001);
        let traj = synthetic(&ts, |t| a1 * (-a2 * t).exp(), |t| -a1 * a2 * (-a2 * t).exp(), |t| a1 * a2 * a2 * (-a2 * t).exp());
        let fit = fit_exponential_in(&traj, &dvector![0.0], FitWindow { start: 0.0, end: ts[2000] }).unwrap();
        prop_assert!((fit.a1 - a1).abs() <= 1e-10 * a1.max(1.0));
        prop_assert!((fit.a2 - a2).abs() <= 1e-10);
        let report = classify_rate(&traj, &exact_limit()).unwrap();
        prop_assert_eq!(report.regime, Regime::Exponential);
        prop_assert!(populated(&report));
    }

    #[test]
    fn polynomial_round_trip(theta in 0.55..0.95f64, a3 in 0.1..2.0f64, a4 in 0.5..5.0f64) {
        let traj = power_law(theta, a3, a4);
        let report = classify_rate(&traj, &exact_limit()).unwrap();
        prop_assert_eq!(report.regime, Regime::Polynomial, "{:?}", report);
        prop_assert!((report.theta.unwrap() - theta).abs() <= 0.01);
        prop_assert!(populated(&report));
        let q = report.fit_quality;
        prop_assert!(q.polynomial.unwrap() <= 1.0 && q.exponential.unwrap_or(f64::NEG_INFINITY) <= 1.0);
    }

    /// When the fits are clearly separated the better one is chosen.
    #[test]
    fn regime_never_crosses(a2 in 0.1..2.0f64, theta in 0.6..0.9f64) {
        let ts = grid(0.0, 25.0 / a2, 2001);
        let exp = synthetic(&ts, |t| (-a2 * t).exp(), |t| -a2 * (-a2 * t).exp(), |t| a2 * a2 * (-a2 * t).exp());
        for traj in [exp, power_law(theta, 1.0, 1.0)] {
            let r = classify_rate(&traj, &exact_limit()).unwrap();
            let q = r.fit_quality;
            if let (Some(re), Some(rp)) = (q.exponential, q.polynomial) {
                if re - rp >= 0.05 {
                    prop_assert_eq!(r.regime, Regime::Exponential);
                }
                if rp - re >= 0.05 {
                    prop_assert_eq!(r.regime, Regime::Polynomial);
                }
            }
        }
    }
}

#[test]
fn critically_damped_log_slope() {
    // x'' + x' + x/4 = 0; v0 = -u0/2 removes the linear prefactor
    let obj = Objective::zero_quad(DMatrix::identity(1, 1), dvector![0.0]).unwrap();
    let params = derive_params(1.0, 0.25, 1.0).unwrap();
    let traj = integrate(&obj, &params, &dvector![1.0], &dvector![-0.5], 25.0, 1e-3, 10).unwrap();
    let fit = fit_exponential_in(&traj, &dvector![0.0], FitWindow { start: 5.0, end: 20.0 }).unwrap();
    assert!((0.45..=0.55).contains(&fit.a2), "a2 = {}", fit.a2);
    for (t, x) in traj.times.iter().zip(&traj.xs) {
        assert!((x[0] - critically_damped(1.0, -0.5, *t)).abs() < 1e-9);
    }
}

#[test]
fn polynomial_examples() {
    let ts = grid(1.0, 1e3, 5000);
    let traj = synthetic(&ts, |t| 1.0 / t, |t| -1.0 / (t * t), |t| 2.0 / (t * t * t));
    let fit = fit_polynomial(&traj, &dvector![0.0], 1.0).unwrap();
    assert!((fit.theta - 2.0 / 3.0).abs() < 1e-6);
    assert!((fit.a4 - fit.a3 * fit.t_ref).abs() <= 1e-12 * fit.a4.abs().max(1.0));
}

#[test]
fn sigma_along_feasible_runs() {
    for run in feasible_runs().into_iter().take(3) {
        let traj = integrate(&run.obj, &run.params, &run.u0, &run.v0, 300.0, 1e-2, 1).unwrap();
        let sigma = sigma_estimate(&traj).unwrap();
        assert!(sigma.sigma.windows(2).all(|w| w[1] <= w[0]), "{}", run.name);
        assert!(sigma.sigma.iter().all(|&s| s >= 0.0));
        let report = sigma_dominance_check(&traj, &sigma, traj.xs.last().unwrap());
        assert!(report.is_clean(), "{}: {report:?}", run.name);
    }
}

#[test]
fn equilibrium_has_zero_sigma_and_finite_time() {
    let obj = lasso();
    let params = derive_params(1.0, 0.05, 1.0).unwrap();
    let traj = integrate(&obj, &params, &dvector![0.5], &dvector![0.0], 10.0, 1e-2, 1).unwrap();
    assert!(sigma_estimate(&traj).unwrap().sigma.iter().all(|&s| s == 0.0));
    let r = classify_rate(&traj, &RateOptions::default()).unwrap();
    assert_eq!(r.regime, Regime::FiniteTime);
    assert!(populated(&r));
}

#[test]
fn report_json_keys() {
    let r = classify_rate(&power_law(0.75, 1.0, 1.0), &exact_limit()).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    for key in [
        "regime",
        "theta",
        "a1",
        "a2",
        "a3",
        "a4",
        "fit_quality",
        "t0",
        "x_limit",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["regime"], "polynomial");
    let back: RateReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, r);
}
