//! `proxflow`: parameter checks, flow integration, the inertial algorithm,
//! rate classification and parameter sweeps.
//!
//! Exit status: 0 on success (including infeasible-parameter warnings),
//! 1 on invalid input, 2 on a numerical abort.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{CmdResult, DiscreteArgs, Failure, Range};
use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "proxflow",
    version,
    about = "Second-order proximal-gradient dynamics experiments"
)]
struct Cli {
    /// Experiment config (JSON) for `run` and `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the flow, monitor the energy and classify the decay rate.
    Run,
    /// Print every derived constant and both feasibility verdicts.
    CheckParams {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        beta: f64,
    },
    /// Run the unit-step inertial proximal-gradient recursion.
    Discrete {
        /// Catalog name, inline JSON spec, or path to a JSON spec.
        #[arg(long)]
        problem: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        gamma: f64,
        /// Use `gamma / (1 + k)^power` instead of a constant.
        #[arg(long)]
        gamma_power: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x0: Vec<f64>,
        /// Defaults to `x0`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x1: Option<Vec<f64>>,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// History CSV; defaults to `<out-dir>/history.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the decay of a trajectory CSV.
    Rates {
        #[arg(long)]
        traj: PathBuf,
        /// `auto` (final sample) or comma-separated coordinates.
        #[arg(long, default_value = "auto", allow_hyphen_values = true)]
        x_limit: String,
        /// `auto` or the fit window start.
        #[arg(long, default_value = "auto")]
        t0: String,
        #[arg(long, default_value_t = 1e-6)]
        converged_tol: f64,
    },
    /// Feasibility over a (gamma, lambda) grid, optionally running each
    /// feasible point.
    Sweep {
        /// Defaults to the beta of the config's problem.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value = "0.05,1.7,50", value_parser = Range::parse)]
        gamma_range: Range,
        #[arg(long, default_value = "0.0005,0.05,50", value_parser = Range::parse)]
        lambda_range: Range,
        /// Run the config at every feasible point.
        #[arg(long)]
        run: bool,
    },
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce(&T) -> String) {
    if json {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
    } else {
        print!("{}", text(value));
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| v.to_string())
}

fn load_config(cli: &Cli) -> CmdResult<Option<ExperimentConfig>> {
    Ok(cli.config.as_deref().map(ExperimentConfig::load).transpose()?)
}

fn dispatch(cli: &Cli) -> CmdResult<()> {
    match &cli.command {
        Command::Run => {
            let cfg = load_config(cli)?.ok_or_else(|| Failure::Invalid(anyhow!("run needs --config")))?;
            let s = commands::run(&cfg, &cli.out_dir)?;
            if let Some(w) = &s.warning {
                eprintln!("warning: {w}");
            }
            emit(cli.json, &s, |s| {
                let regime = s.rate_report.as_ref().map_or_else(
                    || format!("none ({})", s.rate_error.as_deref().unwrap_or("")),
                    |r| format!("{:?} (theta {})", r.regime, opt(r.theta)),
                );
                format!(
                    "rho_feasible     {}\nsamples          {}\nfinal residual   {:e}\nfinal |x'|       {:e}\nfinal |x''|      {:e}\nenergy monotone  {}\nrate regime      {}\n",
                    s.rho_feasible,
                    s.samples,
                    s.final_residual,
                    s.final_velocity_norm,
                    s.final_acceleration_norm,
                    s.energy_monotone,
                    regime
                )
            });
        }
        Command::CheckParams { gamma, lambda, beta } => {
            let v = commands::check_params(*gamma, *lambda, *beta)?;
            emit(cli.json, &v, |v| {
                let p = &v.params;
                let mut out = String::new();
                for (k, x) in [
                    ("gamma", p.gamma),
                    ("lambda", p.lambda),
                    ("beta", p.beta),
                    ("L1", p.L1),
                    ("L2", p.L2),
                    ("L", p.L),
                    ("A", p.A),
                    ("B", p.B),
                    ("C", p.C),
                    ("c", p.c),
                    ("a", p.a_const),
                    ("b", p.b_const),
                    ("s", p.s),
                    ("p", p.p),
                ] {
                    out += &format!("{k:<20}{x}\n");
                }
                out += &format!("{:<20}{}\n{:<20}{}\n", "m", opt(v.m), "r0", opt(v.r0));
                out += &format!(
                    "{:<20}{}\n{:<20}{}\n",
                    "rho_feasible", p.rho_feasible, "corollary_feasible", p.corollary_feasible
                );
                out
            });
        }
        Command::Discrete {
            problem,
            lambda,
            gamma,
            gamma_power,
            x0,
            x1,
            max_iter,
            tol,
            out,
        } => {
            let args = DiscreteArgs {
                problem: problem.clone(),
                lambda: *lambda,
                gamma: *gamma,
                gamma_power: *gamma_power,
                x0: x0.clone(),
                x1: x1.clone(),
                max_iter: *max_iter,
                tol: *tol,
                out: out.clone().unwrap_or_else(|| cli.out_dir.join("history.csv")),
            };
            let s = commands::discrete(&args)?;
            emit(cli.json, &s, |s| {
                format!(
                    "converged        {}\niterations       {}\nfinal residual   {:e}\nobjective        {}\nx                {:?}\n",
                    s.converged, s.iterations, s.final_residual, s.final_objective, s.x_final
                )
            });
        }
        Command::Rates {
            traj,
            x_limit,
            t0,
            converged_tol,
        } => {
            let r = commands::rates(traj, x_limit, t0, *converged_tol)?;
            emit(cli.json, &r, |r| {
                let rep = &r.report;
                format!(
                    "regime   {:?}\ntheta    {}\na1, a2   {}, {}\na3, a4   {}, {}\nwindow   [{}, {}]\n",
                    rep.regime,
                    opt(rep.theta),
                    opt(rep.a1),
                    opt(rep.a2),
                    opt(rep.a3),
                    opt(rep.a4),
                    r.fit_window.start,
                    r.fit_window.end
                )
            });
        }
        Command::Sweep {
            beta,
            gamma_range,
            lambda_range,
            run,
        } => {
            let cfg = load_config(cli)?;
            let s = commands::sweep(*beta, cfg.as_ref(), *gamma_range, *lambda_range, *run, &cli.out_dir)?;
            emit(cli.json, &s, |s| {
                let failed = s.runs.iter().filter(|r| r.error.is_some()).count();
                format!(
                    "beta             {}\nfeasible points  {} / {}\nruns             {} ({} failed)\ngrid             {}\n",
                    s.beta,
                    s.feasible_points,
                    s.grid_points,
                    s.runs.len(),
                    failed,
                    s.grid.display()
                )
            });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
