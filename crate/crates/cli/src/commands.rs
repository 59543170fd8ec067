//! Subcommand implementations. Each returns a JSON-serializable result; the
//! caller decides between JSON and text rendering.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use nalgebra::DVector;
use proxflow::discrete::{run_inertial, GammaSchedule};
use proxflow::dynamics::{default_sample_every, integrate};
use proxflow::io::{read_trajectory, write_energy, write_history, write_trajectory};
use proxflow::lyapunov::{check_monotone, monitor};
use proxflow::params::{derive_params, feasible_region, rate_envelope_constants, SystemParams};
use proxflow::problems::{make_problem, prox_grad_residual};
use proxflow::rates::{classify_rate, FitWindow, RateOptions, RateReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{checked_vector, resolve_problem, ExperimentConfig, Output};

/// A failed command and its exit status.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1.
    Invalid(anyhow::Error),
    /// Exit 2: integration blow-up, divergence or an unconverged trace.
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Invalid(e) | Failure::Numerical(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

impl From<proxflow::Error> for Failure {
    fn from(e: proxflow::Error) -> Self {
        use proxflow::Error::*;
        match e {
            NonFinite { .. } | Diverged { .. } | NotConverged { .. } | OutsideDomain => Failure::Numerical(e.into()),
            _ => Failure::Invalid(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.into())
    }
}

pub type CmdResult<T> = Result<T, Failure>;

/// Every derived constant, plus the envelope constants when feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsView {
    #[serde(flatten)]
    pub params: SystemParams,
    pub m: Option<f64>,
    pub r0: Option<f64>,
}

impl From<SystemParams> for ParamsView {
    fn from(params: SystemParams) -> Self {
        let env = rate_envelope_constants(&params).ok();
        Self {
            params,
            m: env.map(|e| e.m),
            r0: env.map(|e| e.r0),
        }
    }
}

pub fn check_params(gamma: f64, lambda: f64, beta: f64) -> CmdResult<ParamsView> {
    Ok(derive_params(gamma, lambda, beta)?.into())
}

const INFEASIBLE_WARNING: &str =
    "parameters violate the dissipation conditions (A, B, C < 0); energy decrease is not guaranteed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub params: ParamsView,
    pub rho_feasible: bool,
    pub warning: Option<String>,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub samples: usize,
    pub final_time: f64,
    pub final_residual: f64,
    pub final_velocity_norm: f64,
    pub final_acceleration_norm: f64,
    pub energy_monotone: bool,
    pub rate_report: Option<RateReport>,
    /// Why no rate report was produced.
    pub rate_error: Option<String>,
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(anyhow::Error::from)?;
    Ok(())
}

/// Integrates, monitors and classifies one configuration, writing the
/// requested artifacts into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> CmdResult<RunSummary> {
    let obj = make_problem(&cfg.problem)?;
    let params = derive_params(cfg.gamma, cfg.lambda, obj.beta())?;
    if cfg.h.is_nan() || cfg.h <= 0.0 || cfg.h > 1.0 / params.L1 {
        return Err(Failure::Invalid(anyhow!(
            "step h = {} violates the stability guard h <= 1/L1 = {}",
            cfg.h,
            1.0 / params.L1
        )));
    }
    let (u0, v0) = cfg.initial_state(obj.dim())?;
    let sample_every = cfg
        .sample_every
        .unwrap_or_else(|| default_sample_every(cfg.t_end, cfg.h));
    let traj = integrate(&obj, &params, &u0, &v0, cfg.t_end, cfg.h, sample_every)?;
    let trace = monitor(&obj, &params, &traj)?;
    let tol = 1e-6 * (1.0 + trace.energy[0].abs());
    let energy_monotone = check_monotone(&trace, tol).is_clean();
    let (rate_report, rate_error) = match classify_rate(&traj, &RateOptions::default()) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let last = traj.len() - 1;
    let summary = RunSummary {
        params: params.into(),
        rho_feasible: params.rho_feasible,
        warning: (!params.rho_feasible).then(|| INFEASIBLE_WARNING.to_string()),
        u0: u0.iter().copied().collect(),
        v0: v0.iter().copied().collect(),
        samples: traj.len(),
        final_time: traj.t_end(),
        final_residual: prox_grad_residual(&obj, params.lambda, &traj.xs[last]),
        final_velocity_norm: traj.vs[last].norm(),
        final_acceleration_norm: traj.accs[last].norm(),
        energy_monotone,
        rate_report,
        rate_error,
    };

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    if cfg.outputs.contains(&Output::Trajectory) {
        write_trajectory(&traj, create(&out_dir.join("trajectory.csv"))?)?;
    }
    if cfg.outputs.contains(&Output::Energy) {
        write_energy(&trace, create(&out_dir.join("energy.csv"))?)?;
    }
    if cfg.outputs.contains(&Output::Rates) {
        if let Some(r) = &summary.rate_report {
            write_json(&out_dir.join("rates.json"), &RatesOutput::new(r.clone()))?;
        }
    }
    if cfg.outputs.contains(&Output::Summary) {
        write_json(&out_dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

pub struct DiscreteArgs {
    pub problem: String,
    pub lambda: f64,
    pub gamma: f64,
    /// Switches to `gamma / (1 + k)^power`.
    pub gamma_power: Option<f64>,
    pub x0: Vec<f64>,
    pub x1: Option<Vec<f64>>,
    pub max_iter: usize,
    pub tol: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSummary {
    pub schedule: GammaSchedule,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub final_objective: f64,
    pub x_final: Vec<f64>,
    pub history: PathBuf,
}

pub fn discrete(args: &DiscreteArgs) -> CmdResult<DiscreteSummary> {
    let obj = resolve_problem(&args.problem)?;
    let x0 = checked_vector(&args.x0, obj.dim(), "x0")?;
    let x1 = match &args.x1 {
        Some(x1) => checked_vector(x1, obj.dim(), "x1")?,
        None => x0.clone(),
    };
    let schedule = match args.gamma_power {
        Some(power) => GammaSchedule::PowerDecay {
            gamma0: args.gamma,
            power,
        },
        None => GammaSchedule::Constant { gamma: args.gamma },
    };
    let hist = run_inertial(&obj, args.lambda, |k| schedule.at(k), &x0, &x1, args.max_iter, args.tol)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_history(&hist, create(&args.out)?)?;
    Ok(DiscreteSummary {
        schedule,
        converged: hist.converged,
        iterations: hist.iterations,
        final_residual: hist.final_residual(),
        final_objective: *hist.objective_values.last().expect("history is nonempty"),
        x_final: hist.last().iter().copied().collect(),
        history: args.out.clone(),
    })
}

/// A rate report together with the window the fits used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesOutput {
    #[serde(flatten)]
    pub report: RateReport,
    pub fit_window: FitWindow,
}

impl RatesOutput {
    pub fn new(report: RateReport) -> Self {
        let fit_window = FitWindow {
            start: report.t0,
            end: report.window_end,
        };
        Self { report, fit_window }
    }
}

/// `auto` or a comma-separated value.
fn auto_or<T>(s: &str, parse: impl FnOnce(&str) -> anyhow::Result<T>) -> anyhow::Result<Option<T>> {
    if s.trim() == "auto" {
        Ok(None)
    } else {
        parse(s).map(Some)
    }
}

pub fn parse_floats(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("`{p}` is not a number"))
        })
        .collect()
}

pub fn rates(traj_path: &Path, x_limit: &str, t0: &str, converged_tol: f64) -> CmdResult<RatesOutput> {
    let file = File::open(traj_path).with_context(|| format!("opening {}", traj_path.display()))?;
    let traj = read_trajectory(std::io::BufReader::new(file))?;
    let opts = RateOptions {
        x_limit: auto_or(x_limit, |s| Ok(DVector::from_vec(parse_floats(s)?)))?,
        t0: auto_or(t0, |s| {
            s.trim().parse::<f64>().context("--t0 must be `auto` or a number")
        })?,
        converged_tol,
    };
    Ok(RatesOutput::new(classify_rate(&traj, &opts)?))
}

/// `lo,hi,n` grid specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Range {
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("expected lo,hi,n, got `{s}`"));
        };
        let lo: f64 = lo.parse().map_err(|_| format!("bad lower bound `{lo}`"))?;
        let hi: f64 = hi.parse().map_err(|_| format!("bad upper bound `{hi}`"))?;
        let n: usize = n.parse().map_err(|_| format!("bad count `{n}`"))?;
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(format!("need 0 < lo <= hi and n >= 1, got `{s}`"));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub gamma: f64,
    pub lambda: f64,
    pub dir: PathBuf,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub beta: f64,
    pub grid_points: usize,
    pub feasible_points: usize,
    pub grid: PathBuf,
    pub runs: Vec<SweepRun>,
}

/// Writes the verdict for every grid point to `sweep.csv`; with a base
/// config, also runs each feasible point in its own directory.
pub fn sweep(
    beta: Option<f64>,
    base: Option<&ExperimentConfig>,
    gammas: Range,
    lambdas: Range,
    execute: bool,
    out_dir: &Path,
) -> CmdResult<SweepSummary> {
    let beta = match (beta, base) {
        (Some(b), _) => b,
        (None, Some(cfg)) => make_problem(&cfg.problem)?.beta(),
        (None, None) => return Err(Failure::Invalid(anyhow!("sweep needs --beta or --config"))),
    };
    if execute && base.is_none() {
        return Err(Failure::Invalid(anyhow!("--run needs a base experiment from --config")));
    }
    let (gs, ls) = (gammas.points(), lambdas.points());
    let grid: Vec<(usize, usize)> = (0..gs.len()).flat_map(|i| (0..ls.len()).map(move |j| (i, j))).collect();
    let all: Vec<SystemParams> = grid
        .par_iter()
        .map(|&(i, j)| derive_params(gs[i], ls[j], beta))
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let grid_path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&grid_path)?);
    w.write_record([
        "gamma",
        "lambda",
        "L1",
        "L2",
        "L",
        "A",
        "B",
        "C",
        "rho_feasible",
        "corollary_feasible",
    ])
    .map_err(anyhow::Error::from)?;
    for p in &all {
        let mut row: Vec<String> = [p.gamma, p.lambda, p.L1, p.L2, p.L, p.A, p.B, p.C]
            .iter()
            .map(|&x| proxflow::io::fmt_f64(x))
            .collect();
        row.push(p.rho_feasible.to_string());
        row.push(p.corollary_feasible.to_string());
        w.write_record(&row).map_err(anyhow::Error::from)?;
    }
    w.flush()?;

    let feasible = feasible_region(beta, &gs, &ls)?;
    let runs = match base.filter(|_| execute) {
        None => Vec::new(),
        Some(cfg) => feasible
            .par_iter()
            .map(|&(gamma, lambda, _)| {
                let i = gs.iter().position(|&g| g == gamma).expect("grid value");
                let j = ls.iter().position(|&l| l == lambda).expect("grid value");
                let dir = out_dir.join(format!("run_{i:03}_{j:03}"));
                let cfg = ExperimentConfig {
                    gamma,
                    lambda,
                    ..cfg.clone()
                };
                let (summary, error) = match run(&cfg, &dir) {
                    Ok(s) => (Some(s), None),
                    Err(f) => (None, Some(format!("{:#}", f.error()))),
                };
                SweepRun {
                    gamma,
                    lambda,
                    dir,
                    summary,
                    error,
                }
            })
            .collect(),
    };
    let summary = SweepSummary {
        beta,
        grid_points: all.len(),
        feasible_points: feasible.len(),
        grid: grid_path,
        runs,
    };
    write_json(&out_dir.join("sweep_summary.json"), &summary)?;
    Ok(summary)
}
