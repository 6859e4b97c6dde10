//! `ellimpc` command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ellimpc::problem::ProblemFile;
use ellimpc::sim::{closed_loop_simulate, summarize_stats, three_mass, PlantModel};
use ellimpc::terminal::{build_terminal_set, PolytopeConstraints, DEFAULT_LAMBDA_GRID};
use ellimpc::{CostStructure, Error, Matrix, MpcProblem, OfflineData, SolveStatus, SolverSettings, WarmStart};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const EXIT_DOMAIN: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_MAX_ITER: u8 = 3;
const BENCH_ITERATIONS: usize = 200;

#[derive(Parser)]
#[command(name = "ellimpc", version, about = "Sparse ADMM for linear MPC with an ellipsoidal terminal set")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem file and print the violations as JSON
    Validate { problem: PathBuf },
    /// Build fixed-shape terminal ingredients for a problem file
    Terminal {
        problem: PathBuf,
        /// Emit the full problem file with the terminal ingredients filled in
        #[arg(long)]
        complete: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve once from a given initial state
    Solve {
        problem: PathBuf,
        /// Initial state, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop simulation on the nominal model; writes a CSV log
    Simulate {
        problem: PathBuf,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Initial state, comma separated (default: origin)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Add uniform noise of this amplitude to the initial state
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        /// CSV log destination (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary statistics destination (default: stderr)
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Offline memory and per-iteration time for several horizons
    Bench {
        problem: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
        horizons: Vec<usize>,
        /// Timed repetitions per horizon; the median is reported
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Seed for the random initial state near the reference
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_enum, default_value_t = DiagonalCosts::Auto)]
        diagonal_costs: DiagonalCosts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the three-mass benchmark problem file
    CaseStudy {
        /// Leave out the terminal ingredients
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = three_mass::RHO)]
    rho: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps_p: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps_d: f64,
    #[arg(long, default_value_t = 4000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = WarmStartArg::Cold)]
    warmstart: WarmStartArg,
    #[arg(long, value_enum, default_value_t = DiagonalCosts::Auto)]
    diagonal_costs: DiagonalCosts,
}

#[derive(ValueEnum, Clone, Copy)]
enum WarmStartArg {
    Cold,
    Keep,
    Shift,
}

/// Cost-structure path: detect, force the diagonal path, or forbid it.
#[derive(ValueEnum, Clone, Copy)]
enum DiagonalCosts {
    Auto,
    Force,
    Forbid,
}

impl From<DiagonalCosts> for CostStructure {
    fn from(d: DiagonalCosts) -> Self {
        match d {
            DiagonalCosts::Auto => CostStructure::Auto,
            DiagonalCosts::Force => CostStructure::Diagonal,
            DiagonalCosts::Forbid => CostStructure::Dense,
        }
    }
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            eps_p: self.eps_p,
            eps_d: self.eps_d,
            max_iter: self.max_iter,
            warmstart: match self.warmstart {
                WarmStartArg::Cold => WarmStart::Cold,
                WarmStartArg::Keep => WarmStart::Keep,
                WarmStartArg::Shift => WarmStart::Shift,
            },
        }
    }

    fn offline(&self, problem: &MpcProblem) -> ellimpc::Result<OfflineData> {
        OfflineData::build_with(problem, self.rho, self.diagonal_costs.into())
    }
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Json(_) => EXIT_IO,
            _ => EXIT_DOMAIN,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { problem } => cmd_validate(&problem),
        Command::Terminal { problem, complete, out } => cmd_terminal(&problem, complete, out.as_deref()),
        Command::Solve { problem, x, solver, out } => cmd_solve(&problem, &x, &solver, out.as_deref()),
        Command::Simulate {
            problem,
            steps,
            x0,
            perturb,
            seed,
            solver,
            out,
            stats,
        } => cmd_simulate(&problem, steps, x0, perturb, seed, &solver, out.as_deref(), stats.as_deref()),
        Command::Bench {
            problem,
            horizons,
            runs,
            seed,
            rho,
            diagonal_costs,
            out,
        } => cmd_bench(&problem, &horizons, runs, seed, rho, diagonal_costs, out.as_deref()),
        Command::CaseStudy { raw, out } => cmd_case_study(raw, out.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// `ELLIMPC_LOG` takes `off`, `info`, `trace` or any env_logger filter.
fn init_logging() {
    let filter = std::env::var("ELLIMPC_LOG").unwrap_or_else(|_| "warn".into());
    env_logger::Builder::new()
        .parse_filters(&filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn read_file(path: &Path) -> Result<ProblemFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })?;
    ProblemFile::from_json(&text).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

/// Reads a complete problem file and rejects it unless it validates.
fn load_problem(path: &Path) -> Result<MpcProblem, Failure> {
    let problem = read_file(path)?.to_problem()?;
    problem.validate().into_result()?;
    Ok(problem)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut stdout = io::stdout().lock();
            let written = stdout.write_all(text.as_bytes()).and_then(|_| {
                if text.ends_with('\n') {
                    Ok(())
                } else {
                    stdout.write_all(b"\n")
                }
            });
            // a closed reader (e.g. `| head`) is not an error
            match written {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

fn pretty(value: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Error::from(e).into())
}

fn cmd_validate(path: &Path) -> CmdResult {
    let file = read_file(path)?;
    let report = match file.to_problem() {
        Ok(problem) => problem.validate(),
        Err(e) => {
            let body = json!({ "ok": false, "violations": [{ "field": "file", "message": e.to_string() }] });
            emit(None, &pretty(&body)?)?;
            return Ok(EXIT_DOMAIN);
        }
    };
    let body = json!({ "ok": report.is_ok(), "violations": report.violations });
    emit(None, &pretty(&body)?)?;
    Ok(if report.is_ok() { 0 } else { EXIT_DOMAIN })
}

fn cmd_terminal(path: &Path, complete: bool, out: Option<&Path>) -> CmdResult {
    let file = read_file(path)?;
    let a = Matrix::from_rows(&file.a)?;
    let b = Matrix::from_rows(&file.b)?;
    let q = Matrix::from_rows(&file.q)?;
    let r = Matrix::from_rows(&file.r_cost)?;
    let bounds = file.bounds();
    let constraints = PolytopeConstraints::from_stage_bounds(&bounds)?;
    let ti = build_terminal_set(&a, &b, &q, &r, &constraints, &file.x_ref, &file.u_ref, &DEFAULT_LAMBDA_GRID)?;
    let text = if complete {
        let mut full = file.clone();
        full.t = Some(ti.t.to_rows());
        full.p = Some(ti.ellipsoid.p.to_rows());
        full.c = Some(ti.ellipsoid.c.clone());
        full.r = Some(ti.ellipsoid.r);
        full.to_problem()?.validate().into_result()?;
        full.to_json_pretty()?
    } else {
        pretty(&ti.fragment())?
    };
    emit(out, &text)?;
    Ok(0)
}

fn cmd_solve(path: &Path, x: &[f64], args: &SolverArgs, out: Option<&Path>) -> CmdResult {
    let problem = load_problem(path)?;
    let offline = args.offline(&problem)?;
    let res = ellimpc::admm_solve(&problem, &offline, x, &args.settings(), None)?;
    let body = json!({
        "u_apply": res.u_apply,
        "iterations": res.iterations,
        "residuals": res.residuals,
        "status": res.status,
        "terminal_active": res.terminal_active,
    });
    emit(out, &pretty(&body)?)?;
    Ok(match res.status {
        SolveStatus::Converged => 0,
        SolveStatus::MaxIterations => EXIT_MAX_ITER,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    steps: usize,
    x0: Option<Vec<f64>>,
    perturb: f64,
    seed: u64,
    args: &SolverArgs,
    out: Option<&Path>,
    stats_out: Option<&Path>,
) -> CmdResult {
    let problem = load_problem(path)?;
    let offline = args.offline(&problem)?;
    let plant = PlantModel {
        a: problem.a.clone(),
        b: problem.b.clone(),
        state_labels: (1..=problem.n()).map(|i| format!("x{i}")).collect(),
        input_labels: (1..=problem.m()).map(|i| format!("u{i}")).collect(),
        ts: 1.0,
    };
    let mut x0 = x0.unwrap_or_else(|| vec![0.0; problem.n()]);
    if perturb > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in x0.iter_mut() {
            *v += rng.gen_range(-perturb..=perturb);
        }
    }
    let log = closed_loop_simulate(&problem, &offline, &plant, &x0, steps, &args.settings())?;
    let stats = summarize_stats(&log)?;

    let mut csv = Vec::new();
    log.write_csv(&mut csv)?;
    match out {
        Some(p) => fs::write(p, &csv)?,
        None => io::stdout().lock().write_all(&csv)?,
    }
    let body = pretty(&json!({ "stats": stats, "final_state": log.final_state }))?;
    match stats_out {
        Some(p) => fs::write(p, body)?,
        None => eprintln!("{body}"),
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    path: &Path,
    horizons: &[usize],
    runs: usize,
    seed: u64,
    rho: Option<f64>,
    diagonal_costs: DiagonalCosts,
    out: Option<&Path>,
) -> CmdResult {
    if runs == 0 || horizons.is_empty() {
        return Err(Error::InvalidArgument("need at least one horizon and one run".into()).into());
    }
    let base = load_problem(path)?;
    let rho = rho.unwrap_or(three_mass::RHO);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_t: Vec<f64> = base.x_ref.iter().map(|v| v + rng.gen_range(-0.1..=0.1)).collect();
    let settings = SolverSettings {
        eps_p: f64::MIN_POSITIVE,
        eps_d: f64::MIN_POSITIVE,
        max_iter: BENCH_ITERATIONS,
        warmstart: WarmStart::Cold,
    };
    let mut rows = vec!["N,stored_floats,mean_iteration_us".to_string()];
    for &h in horizons {
        let problem = base.with_horizon(h);
        let offline = OfflineData::build_with(&problem, rho, diagonal_costs.into())?;
        let mut times = Vec::with_capacity(runs);
        for _ in 0..runs {
            let start = Instant::now();
            let res = ellimpc::admm_solve(&problem, &offline, &x_t, &settings, None)?;
            times.push(start.elapsed().as_secs_f64() * 1e6 / res.iterations.max(1) as f64);
        }
        times.sort_by(f64::total_cmp);
        rows.push(format!("{h},{},{:.6}", offline.stored_floats(), times[(runs - 1) / 2]));
    }
    emit(out, &(rows.join("\n") + "\n"))?;
    Ok(0)
}

fn cmd_case_study(raw: bool, out: Option<&Path>) -> CmdResult {
    let (_, problem, _) = ellimpc::sim::three_mass_case_study()?;
    let mut file = ProblemFile::from_problem(&problem);
    if raw {
        file.t = None;
        file.p = None;
        file.c = None;
        file.r = None;
    }
    emit(out, &file.to_json_pretty()?)?;
    Ok(0)
}
