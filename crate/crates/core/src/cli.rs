//! Command-line front end. Reports go to the given writer as JSON (or CSV with
//! `--csv`); errors go to stderr and select the exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::catalog::{identity_suite, IdentityReport};
use crate::config::{parse_config, BuiltProblem};
use crate::error::{Error, Result};
use crate::field_io;
use crate::grid::{Diagnostics, ScalarField};
use crate::hermitian::relative_spectrum;
use crate::manufactured::default_dirichlet;
use crate::monitor::{estimate_monitor, EstimateReport};
use crate::pointwise::{cone_excess, subsolution_excess};
use crate::solver::{self, SolveState, StepRecord};

/// Identity residuals above this fail the `identities` subcommand.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(
    name = "jeq",
    version,
    about = "Inverse-Hessian equation solver and identity checker"
)]
struct Cli {
    /// Emit two-column CSV instead of JSON where a history is printed.
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Covariant-derivative commutation residuals over the metric catalog.
    Identities {
        /// Complex dimensions to check.
        #[arg(long = "n", default_values_t = vec![2usize, 3])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pointwise subsolution and cone checks of `usub` against `psi`.
    Subsolution { config: PathBuf },
    /// Solves the configured problem and writes the field and convergence log.
    Solve {
        config: PathBuf,
        /// Also write the estimate report.
        #[arg(long)]
        monitor: bool,
    },
    /// Estimate report for a saved solution field.
    Monitor {
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
    },
    /// Manufactured Dirichlet problem at two resolutions.
    Convergence {
        #[arg(long, default_value_t = 9)]
        coarse: usize,
        #[arg(long, default_value_t = 17)]
        fine: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    #[serde(flatten)]
    pub report: IdentityReport,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: Vec<usize>,
    /// `None` when the matrix is not positive there.
    pub excess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionReport {
    pub points: usize,
    pub subsolution: bool,
    pub cone: bool,
    pub max_subsolution_excess: Option<f64>,
    pub first_subsolution_violation: Option<Violation>,
    pub first_cone_violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub residual: f64,
    pub c: Option<f64>,
    pub newton_steps: usize,
    pub diagnostics: Diagnostics,
    pub max_error: Option<f64>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub points: [usize; 2],
    pub spacing: [f64; 2],
    pub sup_error: [f64; 2],
    pub ratio: f64,
    pub pass: bool,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Applies `JEQ_THREADS` to the global thread pool.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("JEQ_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::config(
            "JEQ_THREADS",
            None,
            format!("expected a positive integer, got `{v}`"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config("JEQ_THREADS", None, e.to_string()))
}

fn emit<T: Serialize>(out: &mut dyn Write, record: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(record).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{s}")?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(record).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

/// Two-column `iter residual` history for plotting.
pub fn history_csv(history: &[StepRecord]) -> String {
    let mut s = String::from("# iter residual\n");
    for r in history {
        s.push_str(&format!("{} {:e}\n", r.iter, r.residual));
    }
    s
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Identities { dims, points, seed } => {
            let mut pass = true;
            let mut records = Vec::new();
            for &n in dims {
                let report = identity_suite(n, *points, *seed)?;
                let max_residual = report.max_residual();
                let ok = max_residual <= IDENTITY_TOLERANCE;
                pass &= ok;
                records.push(IdentityRecord {
                    report,
                    max_residual,
                    pass: ok,
                });
            }
            emit(out, &records)?;
            Ok(if pass { 0 } else { 2 })
        }
        Command::Subsolution { config } => {
            let built = parse_config(config)?.build()?;
            let report = subsolution_report(&built)?;
            emit(out, &report)?;
            Ok(if report.subsolution { 0 } else { 2 })
        }
        Command::Solve { config, monitor } => {
            let cfg = parse_config(config)?;
            let built = cfg.build()?;
            let (state, diagnostics) = solve_built(&built, &cfg.solve)?;
            std::fs::create_dir_all(&cfg.output)?;
            field_io::save_scalar(&cfg.output.join("u.csv"), &state.u)?;
            write_json(&cfg.output.join("convergence.json"), &state.step_history)?;
            if cli.csv {
                std::fs::write(
                    cfg.output.join("convergence.csv"),
                    history_csv(&state.step_history),
                )?;
            }
            if *monitor {
                let r = estimate_monitor(
                    &built.problem,
                    &state,
                    &built.usub,
                    cfg.a_grad,
                    cfg.a_hess,
                    &cfg.solve,
                )?;
                write_json(&cfg.output.join("estimate.json"), &r)?;
            }
            let max_error = built
                .exact
                .as_ref()
                .map(|e| state.u.zip_map(e, |a, b| a - b).sup_norm());
            emit(
                out,
                &SolveSummary {
                    residual: state.residual_norm,
                    c: state.c,
                    newton_steps: state.step_history.len() - 1,
                    diagnostics,
                    max_error,
                    output: cfg.output.clone(),
                },
            )?;
            Ok(0)
        }
        Command::Monitor { config, field } => {
            let cfg = parse_config(config)?;
            let built = cfg.build()?;
            let u = field_io::load_scalar(field, built.problem.grid())?;
            let state = state_from_field(&built, u)?;
            let r: EstimateReport = estimate_monitor(
                &built.problem,
                &state,
                &built.usub,
                cfg.a_grad,
                cfg.a_hess,
                &cfg.solve,
            )?;
            emit(out, &r)?;
            Ok(0)
        }
        Command::Convergence { coarse, fine } => {
            let report = convergence_report(*coarse, *fine)?;
            if cli.csv {
                writeln!(out, "# h sup_error")?;
                for k in 0..2 {
                    writeln!(out, "{:e} {:e}", report.spacing[k], report.sup_error[k])?;
                }
            } else {
                emit(out, &report)?;
            }
            Ok(if report.pass { 0 } else { 2 })
        }
    }
}

pub fn solve_built(
    built: &BuiltProblem,
    cfg: &solver::SolveConfig,
) -> Result<(SolveState, Diagnostics)> {
    if built.problem.is_closed() {
        solver::solve_closed(&built.problem, built.initial.as_ref(), cfg)
    } else {
        let phi = built.phi.as_ref().expect("box configs carry phi");
        solver::solve_dirichlet(
            &built.problem,
            phi,
            &built.usub,
            built.initial.as_ref(),
            cfg,
        )
    }
}

/// Rebuilds a solver state (residual and, on periodic grids, `c`) from a saved field.
pub fn state_from_field(built: &BuiltProblem, u: ScalarField) -> Result<SolveState> {
    let p = &built.problem;
    let c = if p.is_closed() {
        let e = solver::evaluate(p, &u.values, 0.0, false)?;
        Some(e.trace.iter().sum::<f64>() / e.trace.len() as f64)
    } else {
        None
    };
    let e = solver::evaluate(p, &u.values, c.unwrap_or(0.0), false)?;
    Ok(SolveState {
        u,
        c,
        residual_norm: e.sup,
        step_history: Vec::new(),
    })
}

pub fn subsolution_report(built: &BuiltProblem) -> Result<SubsolutionReport> {
    let p = &built.problem;
    let grid = p.grid();
    let psi = built
        .psi
        .as_ref()
        .ok_or_else(|| Error::config("psi", None, "the subsolution check needs `psi`"))?;
    let mut report = SubsolutionReport {
        points: 0,
        subsolution: true,
        cone: true,
        max_subsolution_excess: None,
        first_subsolution_violation: None,
        first_cone_violation: None,
    };
    for q in (0..grid.len()).filter(|&q| p.is_active(q)) {
        report.points += 1;
        let index = grid.multi_index(q);
        let lambda = relative_spectrum(&p.gfrak_at(&built.usub.values, q), &p.g.values[q])?;
        let (sub, cone) = match (
            subsolution_excess(&lambda, psi.values[q]),
            cone_excess(&lambda, psi.values[q]),
        ) {
            (Ok(s), Ok(c)) => (Some(s), Some(c)),
            _ => (None, None),
        };
        if let Some(s) = sub {
            report.max_subsolution_excess =
                Some(report.max_subsolution_excess.map_or(s, |m: f64| m.max(s)));
        }
        if sub.map_or(true, |s| s > 0.0) && report.first_subsolution_violation.is_none() {
            report.subsolution = false;
            report.first_subsolution_violation = Some(Violation {
                index: index.clone(),
                excess: sub,
            });
        }
        if cone.map_or(true, |c| c >= 0.0) && report.first_cone_violation.is_none() {
            report.cone = false;
            report.first_cone_violation = Some(Violation {
                index,
                excess: cone,
            });
        }
    }
    Ok(report)
}

pub fn convergence_report(coarse: usize, fine: usize) -> Result<ConvergenceReport> {
    let cfg = solver::SolveConfig::default();
    let mut errors = [0.0; 2];
    let mut spacing = [0.0; 2];
    for (k, &points) in [coarse, fine].iter().enumerate() {
        let m = default_dirichlet(points, 1.0)?;
        let (state, _) = solver::solve_dirichlet(&m.problem, &m.phi, &m.usub, None, &cfg)?;
        errors[k] = state.u.zip_map(&m.exact, |a, b| a - b).sup_norm();
        spacing[k] = m.problem.grid().spacing()[0];
    }
    let ratio = errors[0] / errors[1];
    Ok(ConvergenceReport {
        points: [coarse, fine],
        spacing,
        sup_error: errors,
        ratio,
        pass: (3.0..=5.0).contains(&ratio),
    })
}
