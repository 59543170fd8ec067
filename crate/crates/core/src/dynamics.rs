//! First-order reformulation `X' = F(X)` with `X = (x, x')` and a
//! fixed-step RK4 integrator.
//!
//! `F(u, v) = (v, prox_{lambda f}(u - lambda grad g(u)) - gamma v - u)` is
//! globally Lipschitz with constant `L1`, which also bounds the admissible
//! step: `h <= 1 / L1`.

use serde::{Deserialize, Serialize};

use crate::params::SystemParams;
use crate::problems::Objective;
use crate::{Error, Result, Vector};

/// Samples kept per trace when the caller lets [`default_sample_every`] pick.
pub const MAX_DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vector,
    pub v: Vector,
}

impl State {
    pub fn new(u: Vector, v: Vector) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                what: "v0",
                expected: u.len(),
                got: v.len(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

/// `x''` as an algebraic function of `(x, x')`.
pub fn acceleration(obj: &Objective, params: &SystemParams, u: &Vector, v: &Vector) -> Vector {
    obj.forward_backward(params.lambda, u) - v * params.gamma - u
}

pub fn vector_field(obj: &Objective, params: &SystemParams, state: &State) -> (Vector, Vector) {
    (state.v.clone(), acceleration(obj, params, &state.u, &state.v))
}

/// Time-sampled solution of the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub xs: Vec<Vector>,
    pub vs: Vec<Vector>,
    pub accs: Vec<Vector>,
    /// Absent for trajectories read back from CSV.
    pub params: Option<SystemParams>,
    pub step: f64,
    pub sample_every: usize,
    pub method: String,
}

impl Trajectory {
    /// Wraps externally produced samples, inferring the spacing.
    pub fn from_samples(times: Vec<f64>, xs: Vec<Vector>, vs: Vec<Vector>, accs: Vec<Vector>) -> Result<Self> {
        let n = times.len();
        if xs.len() != n || vs.len() != n || accs.len() != n {
            return Err(Error::InvalidInput("times, xs, vs, accs must have equal length".into()));
        }
        if let Some(dim) = xs.first().map(|x| x.len()) {
            for seq in [&xs, &vs, &accs] {
                if let Some(bad) = seq.iter().find(|x| x.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        what: "sample",
                        expected: dim,
                        got: bad.len(),
                    });
                }
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("times must be strictly increasing".into()));
        }
        let step = if n >= 2 {
            (times[n - 1] - times[0]) / (n - 1) as f64
        } else {
            0.0
        };
        Ok(Self {
            times,
            xs,
            vs,
            accs,
            params: None,
            step,
            sample_every: 1,
            method: "samples".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs.first().map_or(0, |x| x.len())
    }

    /// Spacing between consecutive samples.
    pub fn dt(&self) -> f64 {
        self.step * self.sample_every as f64
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `|x'(t_i)| + |x''(t_i)|`, the integrand of `sigma`.
    pub fn speed(&self, i: usize) -> f64 {
        self.vs[i].norm() + self.accs[i].norm()
    }
}

/// Smallest stride keeping a trace at most [`MAX_DEFAULT_SAMPLES`] long.
pub fn default_sample_every(t_end: f64, h: f64) -> usize {
    let steps = (t_end / h).floor().max(1.0) as usize;
    steps.div_ceil(MAX_DEFAULT_SAMPLES).max(1)
}

fn rk4_step(obj: &Objective, params: &SystemParams, s: &State, h: f64) -> State {
    let field = |u: &Vector, v: &Vector| (v.clone(), acceleration(obj, params, u, v));
    let (k1u, k1v) = field(&s.u, &s.v);
    let (k2u, k2v) = field(&(&s.u + &k1u * (0.5 * h)), &(&s.v + &k1v * (0.5 * h)));
    let (k3u, k3v) = field(&(&s.u + &k2u * (0.5 * h)), &(&s.v + &k2v * (0.5 * h)));
    let (k4u, k4v) = field(&(&s.u + &k3u * h), &(&s.v + &k3v * h));
    State {
        u: &s.u + (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0),
        v: &s.v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0),
    }
}

/// Classical RK4 from `(u0, v0)` over `[0, t_end]`.
///
/// The number of steps is `floor(t_end / h)` rounded down to a multiple of
/// `sample_every`, so samples are uniformly spaced by `h * sample_every` and
/// the last one sits at the last completed step.
pub fn integrate(
    obj: &Objective,
    params: &SystemParams,
    u0: &Vector,
    v0: &Vector,
    t_end: f64,
    h: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    for (what, x) in [("u0", u0), ("v0", v0)] {
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
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("h must be > 0, got {h}")));
    }
    if h > 1.0 / params.L1 {
        return Err(Error::StepTooLarge {
            h,
            max: 1.0 / params.L1,
        });
    }
    if !(t_end >= h && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be >= h, got {t_end}")));
    }
    if sample_every == 0 {
        return Err(Error::InvalidInput("sample_every must be >= 1".into()));
    }
    let raw_steps = (t_end / h * (1.0 + 1e-12)).floor() as usize;
    let n_samples = raw_steps / sample_every;
    if n_samples == 0 {
        return Err(Error::InvalidInput(format!(
            "t_end / h = {raw_steps} steps is shorter than sample_every = {sample_every}"
        )));
    }

    let mut traj = Trajectory {
        times: Vec::with_capacity(n_samples + 1),
        xs: Vec::with_capacity(n_samples + 1),
        vs: Vec::with_capacity(n_samples + 1),
        accs: Vec::with_capacity(n_samples + 1),
        params: Some(*params),
        step: h,
        sample_every,
        method: "rk4".into(),
    };
    let push = |traj: &mut Trajectory, t: f64, s: &State| {
        traj.times.push(t);
        traj.accs.push(acceleration(obj, params, &s.u, &s.v));
        traj.xs.push(s.u.clone());
        traj.vs.push(s.v.clone());
    };

    let mut state = State::new(u0.clone(), v0.clone())?;
    push(&mut traj, 0.0, &state);
    for i in 1..=n_samples {
        for j in 0..sample_every {
            state = rk4_step(obj, params, &state, h);
            if !state.is_finite() {
                let step = (i - 1) * sample_every + j + 1;
                return Err(Error::NonFinite { t: step as f64 * h });
            }
        }
        push(&mut traj, (i * sample_every) as f64 * h, &state);
    }
    Ok(traj)
}

/// One interior sample of [`third_derivative_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdDerivativeSample {
    pub t: f64,
    /// `|x'''(t)|` from central differences of `x''`.
    pub lhs: f64,
    /// `sqrt(L1^2 |x'|^2 + (L1^2 - 1) |x''|^2)`
    pub rhs_l1: f64,
    /// Same with `L2`.
    pub rhs_l2: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdDerivativeReport {
    /// Added to both right-hand sides: `10 dt^2 max |x''|`.
    pub tolerance: f64,
    pub samples: Vec<ThirdDerivativeSample>,
}

impl ThirdDerivativeReport {
    pub fn violations(&self) -> impl Iterator<Item = &ThirdDerivativeSample> {
        self.samples.iter().filter(|s| !s.ok)
    }

    pub fn all_ok(&self) -> bool {
        self.samples.iter().all(|s| s.ok)
    }
}

/// Checks `|x'''|^2 <= L^2 |x'|^2 + (L^2 - 1) |x''|^2` for both `L1` and `L2`
/// at every interior sample.
pub fn third_derivative_check(traj: &Trajectory, params: &SystemParams) -> Result<ThirdDerivativeReport> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::TooFewSamples(format!(
            "third derivative check needs >= 3 samples, got {n}"
        )));
    }
    let dt = traj.dt();
    let max_acc = traj.accs.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let tolerance = 10.0 * dt * dt * max_acc;
    let rhs = |l: f64, v: f64, a: f64| (l * l * v * v + (l * l - 1.0) * a * a).sqrt();

    let samples = (1..n - 1)
        .map(|i| {
            let lhs = ((&traj.accs[i + 1] - &traj.accs[i - 1]) / (2.0 * dt)).norm();
            let (v, a) = (traj.vs[i].norm(), traj.accs[i].norm());
            let rhs_l1 = rhs(params.L1, v, a);
            let rhs_l2 = rhs(params.L2, v, a);
            ThirdDerivativeSample {
                t: traj.times[i],
                lhs,
                rhs_l1,
                rhs_l2,
                ok: lhs <= rhs_l1.min(rhs_l2) + tolerance,
            }
        })
        .collect();
    Ok(ThirdDerivativeReport { tolerance, samples })
}
