//! Catalog of composite objectives `f + g`.
//!
//! Every entry pairs a convex prox-friendly `f` with a smooth `g` whose
//! gradient Lipschitz constant `beta` is computed exactly (spectral norm for
//! quadratics, closed form for `cos_quad`).
//!
//! | name        | f                   | g                              |
//! |-------------|---------------------|--------------------------------|
//! | `zero_quad` | 0                   | `x'Qx/2 - b'x`, Q PSD          |
//! | `lasso`     | `mu |x|_1`          | `|Mx - y|^2 / 2`               |
//! | `box_quad`  | indicator of [l, u] | `x'Qx/2 - b'x`, Q symmetric    |
//! | `cos_quad`  | 0 or `mu |x|_1`     | `sum x_i^2/2 + 2 cos x_i`      |

use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vector};

/// Convex, proper, lower semicontinuous part of the objective.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxFn {
    Zero { dim: usize },
    L1 { dim: usize, mu: f64 },
    BoxIndicator { lower: Vector, upper: Vector },
}

impl ProxFn {
    pub fn dim(&self) -> usize {
        match self {
            ProxFn::Zero { dim } | ProxFn::L1 { dim, .. } => *dim,
            ProxFn::BoxIndicator { lower, .. } => lower.len(),
        }
    }

    pub fn in_domain(&self, x: &Vector) -> bool {
        match self {
            ProxFn::BoxIndicator { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(xi, (l, u))| l <= xi && xi <= u),
            _ => true,
        }
    }

    /// Value of `f`; `f64::INFINITY` outside the domain.
    pub fn eval(&self, x: &Vector) -> f64 {
        match self {
            ProxFn::Zero { .. } => 0.0,
            ProxFn::L1 { mu, .. } => mu * x.lp_norm(1),
            ProxFn::BoxIndicator { .. } => {
                if self.in_domain(x) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_y f(y) + |y - x|^2 / (2 lambda)`.
    pub fn prox(&self, lambda: f64, x: &Vector) -> Vector {
        match self {
            ProxFn::Zero { .. } => x.clone(),
            ProxFn::L1 { mu, .. } => {
                let t = lambda * mu;
                x.map(|xi| soft_threshold(xi, t))
            }
            ProxFn::BoxIndicator { lower, upper } => DVector::from_fn(x.len(), |i, _| x[i].clamp(lower[i], upper[i])),
        }
    }

    /// `dist(-q, df(x)) = min { |xi + q| : xi in df(x) }`; infinite outside
    /// the domain.
    pub fn subdiff_distance(&self, x: &Vector, q: &Vector) -> f64 {
        match self {
            ProxFn::Zero { .. } => q.norm(),
            ProxFn::L1 { mu, .. } => x
                .iter()
                .zip(q.iter())
                .map(|(&xi, &qi)| {
                    let d = if xi > 0.0 {
                        mu + qi
                    } else if xi < 0.0 {
                        qi - mu
                    } else {
                        (qi.abs() - mu).max(0.0)
                    };
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            ProxFn::BoxIndicator { lower, upper } => {
                if !self.in_domain(x) {
                    return f64::INFINITY;
                }
                let mut acc = 0.0;
                for i in 0..x.len() {
                    let (xi, qi, l, u) = (x[i], q[i], lower[i], upper[i]);
                    // normal cone: {0} inside, (-inf, 0] at l, [0, inf) at u
                    let d = if l == u {
                        0.0
                    } else if xi == l {
                        (-qi).max(0.0)
                    } else if xi == u {
                        qi.max(0.0)
                    } else {
                        qi.abs()
                    };
                    acc += d * d;
                }
                acc.sqrt()
            }
        }
    }
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmoothKind {
    /// `x'Qx/2 - b'x`
    Quadratic { q: DMatrix<f64>, b: Vector },
    /// `|Mx - y|^2 / 2`
    LeastSquares { m: DMatrix<f64>, y: Vector },
    /// `sum_i x_i^2/2 + 2 cos(x_i)`; second derivative lies in [-1, 3].
    CosQuad { dim: usize },
}

/// Smooth part of the objective together with its gradient Lipschitz
/// constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFn {
    kind: SmoothKind,
    beta: f64,
}

impl SmoothFn {
    pub fn quadratic(q: DMatrix<f64>, b: Vector) -> Result<Self> {
        check_square_symmetric(&q)?;
        if b.len() != q.nrows() {
            return Err(Error::DimensionMismatch {
                what: "b",
                expected: q.nrows(),
                got: b.len(),
            });
        }
        let eig = SymmetricEigen::new(q.clone()).eigenvalues;
        let beta = eig.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        Ok(Self {
            kind: SmoothKind::Quadratic { q, b },
            beta,
        })
    }

    pub fn least_squares(m: DMatrix<f64>, y: Vector) -> Result<Self> {
        if y.len() != m.nrows() {
            return Err(Error::DimensionMismatch {
                what: "y",
                expected: m.nrows(),
                got: y.len(),
            });
        }
        let gram = m.transpose() * &m;
        let beta = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .fold(0.0_f64, |acc, e| acc.max(*e));
        Ok(Self {
            kind: SmoothKind::LeastSquares { m, y },
            beta,
        })
    }

    pub fn cos_quad(dim: usize) -> Self {
        Self {
            kind: SmoothKind::CosQuad { dim },
            beta: 3.0,
        }
    }

    pub fn kind(&self) -> &SmoothKind {
        &self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SmoothKind::Quadratic { q, .. } => q.ncols(),
            SmoothKind::LeastSquares { m, .. } => m.ncols(),
            SmoothKind::CosQuad { dim } => *dim,
        }
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        match &self.kind {
            SmoothKind::Quadratic { q, b } => 0.5 * x.dot(&(q * x)) - b.dot(x),
            SmoothKind::LeastSquares { m, y } => 0.5 * (m * x - y).norm_squared(),
            SmoothKind::CosQuad { .. } => x.iter().map(|xi| 0.5 * xi * xi + 2.0 * xi.cos()).sum(),
        }
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        match &self.kind {
            SmoothKind::Quadratic { q, b } => q * x - b,
            SmoothKind::LeastSquares { m, y } => m.transpose() * (m * x - y),
            SmoothKind::CosQuad { .. } => x.map(|xi| xi - 2.0 * xi.sin()),
        }
    }
}

fn check_square_symmetric(q: &DMatrix<f64>) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::DimensionMismatch {
            what: "Q columns",
            expected: q.nrows(),
            got: q.ncols(),
        });
    }
    let scale = q.amax().max(1.0);
    for i in 0..q.nrows() {
        for j in 0..i {
            if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidSpec(format!("Q is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    ZeroQuad,
    Lasso,
    BoxQuad,
    CosQuad,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::ZeroQuad => "zero_quad",
            ProblemKind::Lasso => "lasso",
            ProblemKind::BoxQuad => "box_quad",
            ProblemKind::CosQuad => "cos_quad",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_quad" => Ok(ProblemKind::ZeroQuad),
            "lasso" => Ok(ProblemKind::Lasso),
            "box_quad" => Ok(ProblemKind::BoxQuad),
            "cos_quad" => Ok(ProblemKind::CosQuad),
            other => Err(Error::UnknownProblem(other.to_owned())),
        }
    }
}

/// A composite objective `f + g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    kind: ProblemKind,
    f: ProxFn,
    g: SmoothFn,
}

impl Objective {
    pub fn new(kind: ProblemKind, f: ProxFn, g: SmoothFn) -> Result<Self> {
        if f.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                what: "f",
                expected: g.dim(),
                got: f.dim(),
            });
        }
        if f.dim() == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        Ok(Self { kind, f, g })
    }

    pub fn zero_quad(q: DMatrix<f64>, b: Vector) -> Result<Self> {
        let g = SmoothFn::quadratic(q, b)?;
        if let SmoothKind::Quadratic { q, .. } = g.kind() {
            let min_eigenvalue = SymmetricEigen::new(q.clone()).eigenvalues.min();
            if min_eigenvalue < -1e-12 * g.beta().max(1.0) {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
            }
        }
        let dim = g.dim();
        Self::new(ProblemKind::ZeroQuad, ProxFn::Zero { dim }, g)
    }

    pub fn lasso(m: DMatrix<f64>, y: Vector, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidSpec(format!("mu must be >= 0, got {mu}")));
        }
        let g = SmoothFn::least_squares(m, y)?;
        let dim = g.dim();
        Self::new(ProblemKind::Lasso, ProxFn::L1 { dim, mu }, g)
    }

    pub fn box_quad(q: DMatrix<f64>, b: Vector, lower: Vector, upper: Vector) -> Result<Self> {
        let g = SmoothFn::quadratic(q, b)?;
        for (what, v) in [("lower", &lower), ("upper", &upper)] {
            if v.len() != g.dim() {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: g.dim(),
                    got: v.len(),
                });
            }
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidSpec("box requires lower <= upper".into()));
        }
        Self::new(ProblemKind::BoxQuad, ProxFn::BoxIndicator { lower, upper }, g)
    }

    pub fn cos_quad(dim: usize, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidSpec(format!("mu must be >= 0, got {mu}")));
        }
        let f = if mu == 0.0 {
            ProxFn::Zero { dim }
        } else {
            ProxFn::L1 { dim, mu }
        };
        Self::new(ProblemKind::CosQuad, f, SmoothFn::cos_quad(dim))
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn f(&self) -> &ProxFn {
        &self.f
    }

    pub fn g(&self) -> &SmoothFn {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn beta(&self) -> f64 {
        self.g.beta()
    }

    /// `(f + g)(x)`, infinite outside `dom f`.
    pub fn value(&self, x: &Vector) -> f64 {
        let fx = self.f.eval(x);
        if fx.is_infinite() {
            return fx;
        }
        fx + self.g.eval(x)
    }

    /// Forward-backward point `prox_{lambda f}(x - lambda grad g(x))`.
    pub fn forward_backward(&self, lambda: f64, x: &Vector) -> Vector {
        let y = x - self.g.grad(x) * lambda;
        self.f.prox(lambda, &y)
    }

    /// `dist(0, d(f+g)(x))` from the catalog's explicit subdifferentials.
    pub fn stationarity(&self, x: &Vector) -> f64 {
        self.f.subdiff_distance(x, &self.g.grad(x))
    }
}

/// Evaluates `prox_{lambda f}(x)`.
pub fn prox_eval(f: &ProxFn, lambda: f64, x: &Vector) -> Result<Vector> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be > 0, got {lambda}")));
    }
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            what: "x",
            expected: f.dim(),
            got: x.len(),
        });
    }
    Ok(f.prox(lambda, x))
}

/// `|x - prox_{lambda f}(x - lambda grad g(x))| / lambda`, zero exactly at
/// critical points of `f + g`.
pub fn prox_grad_residual(obj: &Objective, lambda: f64, x: &Vector) -> f64 {
    (x - obj.forward_backward(lambda, x)).norm() / lambda
}

/// Dense matrix given either as nested rows or as a flat row-major array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixSpec {
    fn to_matrix(&self, cols: usize, what: &'static str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Rows(rows) => {
                if rows.is_empty() {
                    return Err(Error::InvalidSpec(format!("{what} has no rows")));
                }
                for r in rows {
                    if r.len() != cols {
                        return Err(Error::DimensionMismatch {
                            what,
                            expected: cols,
                            got: r.len(),
                        });
                    }
                }
                Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
            }
            MatrixSpec::Flat(data) => {
                if data.is_empty() || cols == 0 || data.len() % cols != 0 {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: cols,
                        got: data.len(),
                    });
                }
                Ok(DMatrix::from_row_slice(data.len() / cols, cols, data))
            }
        }
    }

    fn columns(&self) -> Option<usize> {
        match self {
            MatrixSpec::Rows(rows) => rows.first().map(Vec::len),
            MatrixSpec::Flat(_) => None,
        }
    }
}

/// JSON problem description, e.g.
/// `{"name": "lasso", "dim": 2, "M": [[1, 0], [0, 2]], "y": [1, 1], "mu": 0.5}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<MatrixSpec>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

impl ProblemSpec {
    fn resolve_dim(&self, matrix: Option<&MatrixSpec>) -> Result<usize> {
        match (self.dim, matrix.and_then(MatrixSpec::columns)) {
            (Some(d), Some(c)) if d != c => Err(Error::DimensionMismatch {
                what: "matrix columns",
                expected: d,
                got: c,
            }),
            (Some(d), _) | (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::InvalidSpec(format!("`dim` is required for {}", self.name))),
        }
    }

    fn vector(&self, v: &Option<Vec<f64>>, what: &'static str, dim: usize) -> Result<Option<Vector>> {
        match v {
            None => Ok(None),
            Some(v) if v.len() != dim => Err(Error::DimensionMismatch {
                what,
                expected: dim,
                got: v.len(),
            }),
            Some(v) => Ok(Some(DVector::from_column_slice(v))),
        }
    }

    fn required<'a>(&self, m: &'a Option<MatrixSpec>, what: &str) -> Result<&'a MatrixSpec> {
        m.as_ref()
            .ok_or_else(|| Error::InvalidSpec(format!("{} requires `{what}`", self.name)))
    }
}

/// Instantiates a catalog entry from its JSON description.
pub fn make_problem(spec: &ProblemSpec) -> Result<Objective> {
    let kind: ProblemKind = spec.name.parse()?;
    match kind {
        ProblemKind::ZeroQuad | ProblemKind::BoxQuad => {
            let qspec = spec.required(&spec.q, "Q")?;
            let dim = spec.resolve_dim(Some(qspec))?;
            let q = qspec.to_matrix(dim, "Q")?;
            let b = spec.vector(&spec.b, "b", dim)?.unwrap_or_else(|| DVector::zeros(dim));
            if kind == ProblemKind::ZeroQuad {
                Objective::zero_quad(q, b)
            } else {
                let lower = spec
                    .vector(&spec.lower, "lower", dim)?
                    .ok_or_else(|| Error::InvalidSpec("box_quad requires `lower`".into()))?;
                let upper = spec
                    .vector(&spec.upper, "upper", dim)?
                    .ok_or_else(|| Error::InvalidSpec("box_quad requires `upper`".into()))?;
                Objective::box_quad(q, b, lower, upper)
            }
        }
        ProblemKind::Lasso => {
            let mspec = spec.required(&spec.m, "M")?;
            let dim = spec.resolve_dim(Some(mspec))?;
            let m = mspec.to_matrix(dim, "M")?;
            let y = spec
                .vector(&spec.y, "y", m.nrows())?
                .ok_or_else(|| Error::InvalidSpec("lasso requires `y`".into()))?;
            let mu = spec
                .mu
                .ok_or_else(|| Error::InvalidSpec("lasso requires `mu`".into()))?;
            Objective::lasso(m, y, mu)
        }
        ProblemKind::CosQuad => {
            let dim = spec.resolve_dim(None)?;
            Objective::cos_quad(dim, spec.mu.unwrap_or(0.0))
        }
    }
}
