use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown problem `{0}` (expected one of zero_quad, lasso, box_quad, cos_quad)")]
    UnknownProblem(String),

    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {what} has {got} entries, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix Q is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step h = {h} exceeds the stability guard 1/L1 = {max}")]
    StepTooLarge { h: f64, max: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("iterate {index} diverged (norm {norm:e} > 1e12)")]
    Diverged { index: usize, norm: f64 },

    #[error("point lies outside the domain of f")]
    OutsideDomain,

    #[error("parameters violate the dissipation conditions (A = {a}, B = {b}, C = {c})")]
    Infeasible { a: f64, b: f64, c: f64 },

    #[error("not enough samples: {0}")]
    TooFewSamples(String),

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("trajectory has not converged (final stationarity {measure:e} > {tol:e})")]
    NotConverged { measure: f64, tol: f64 },

    #[error("malformed CSV: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
