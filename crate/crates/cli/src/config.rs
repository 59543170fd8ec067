//! Experiment configuration and input resolution.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::DVector;
use proxflow::problems::{make_problem, Objective, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Trajectory,
    Energy,
    Rates,
    Summary,
}

fn all_outputs() -> BTreeSet<Output> {
    [Output::Trajectory, Output::Energy, Output::Rates, Output::Summary].into()
}

/// One integration experiment. `u0` is drawn uniformly from `[-1, 1]^n`
/// with `seed` when omitted; `v0` defaults to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub gamma: f64,
    pub lambda: f64,
    #[serde(default)]
    pub u0: Option<Vec<f64>>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    pub t_end: f64,
    pub h: f64,
    /// Defaults to a stride keeping at most 1e5 samples.
    #[serde(default)]
    pub sample_every: Option<usize>,
    #[serde(default = "all_outputs")]
    pub outputs: BTreeSet<Output>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Initial state, validated against the problem dimension.
    pub fn initial_state(&self, dim: usize) -> anyhow::Result<(DVector<f64>, DVector<f64>)> {
        let u0 = match &self.u0 {
            Some(u) => checked_vector(u, dim, "u0")?,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0))
            }
        };
        let v0 = match &self.v0 {
            Some(v) => checked_vector(v, dim, "v0")?,
            None => DVector::zeros(dim),
        };
        Ok((u0, v0))
    }
}

pub fn checked_vector(v: &[f64], dim: usize, what: &str) -> anyhow::Result<DVector<f64>> {
    if v.len() != dim {
        bail!("{what} has {} entries, problem dimension is {dim}", v.len());
    }
    Ok(DVector::from_column_slice(v))
}

/// Catalog name (one-dimensional default instance), inline JSON, or a path
/// to a JSON problem spec.
pub fn resolve_problem(arg: &str) -> anyhow::Result<Objective> {
    let spec: ProblemSpec = if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).context("parsing inline problem spec")?
    } else if Path::new(arg).is_file() {
        let text = std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
        serde_json::from_str(&text).with_context(|| format!("parsing problem spec {arg}"))?
    } else {
        default_instance(arg)?
    };
    Ok(make_problem(&spec)?)
}

fn default_instance(name: &str) -> anyhow::Result<ProblemSpec> {
    let json = match name {
        "zero_quad" => r#"{"name": "zero_quad", "Q": [[1]], "b": [1]}"#,
        "lasso" => r#"{"name": "lasso", "M": [[1]], "y": [1], "mu": 0.5}"#,
        "box_quad" => r#"{"name": "box_quad", "Q": [[1]], "b": [2], "lower": [-1], "upper": [1]}"#,
        "cos_quad" => r#"{"name": "cos_quad", "dim": 1}"#,
        other => bail!("`{other}` is neither a catalog name, inline JSON, nor a spec file"),
    };
    Ok(serde_json::from_str(json)?)
}
