//! Command-line driver: forward runs, synthetic data, inversion, sweeps and
//! gradient checks from one JSON configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spheroid_core::io::{self, RunConfig};
use spheroid_core::optimizer::minimize;
use spheroid_core::verify::{grad_check, residual_audit, sample_box};
use spheroid_core::{Error, FaultInjection, Problem};

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "spheroid",
    version,
    about = "Tumour spheroid growth and kinetic parameter recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the growth model at `parameters` and write the trajectory.
    Forward(Common),
    /// Minimize the misfit from `initial_guess`.
    Invert(Common),
    /// Tabulate the misfit over a c_c x c_d grid.
    Sweep(Common),
    /// Compare adjoint and finite-difference gradients.
    Gradcheck(Common),
    /// Write synthetic observations and the initial state.
    Generate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Also write the multiplier fields.
    #[arg(long)]
    emit_adjoint: bool,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Verify(String),
    Core(Error),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

type Outcome = Result<(), Failure>;

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    emit_adjoint: bool,
}

impl Run {
    fn new(args: &Common) -> Result<Self, Failure> {
        let mut cfg = RunConfig::load(&args.config)?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            cfg,
            out,
            emit_adjoint: args.emit_adjoint,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn problem(&self) -> Result<Problem, Failure> {
        let ic = self.cfg.initial_state()?;
        let obs = self.cfg.observations(&ic)?;
        let mut problem = self.cfg.problem(ic, obs);
        if cfg!(feature = "inject-fault") {
            log::warn!("fault injection enabled: lambda2 gradient term is sign-flipped");
            problem.fault = FaultInjection { flip_lambda2: true };
        }
        Ok(problem)
    }

    fn emit_adjoint(&self, problem: &Problem, p: &spheroid_core::Parameters) -> Outcome {
        if self.emit_adjoint {
            let eval = problem.evaluate(p)?;
            let dir = self.path("adjoint");
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            io::write_adjoint(&dir, &problem.grid, &eval.adjoint)?;
        }
        Ok(())
    }
}

fn forward(run: &Run) -> Outcome {
    let cfg = &run.cfg;
    let ic = cfg.initial_state()?;
    let p = cfg.parameters;
    let traj = spheroid_core::solve_forward(&p, &ic, &cfg.grid, &cfg.constants, &cfg.solver)?;
    io::write_trajectory(&run.out, &traj)?;
    io::write_initial_condition(&run.path("initial_condition.json"), &ic)?;
    let audit = residual_audit(&traj, &ic, &p, &cfg.constants)?;
    let invariants = traj.invariant_report();
    io::write_json(
        &run.path("summary.json"),
        &json!({
            "parameters": p,
            "final_radius": traj.final_radius(),
            "invariants": invariants,
            "invariants_hold": invariants.holds(),
            "residuals": audit,
            "residual_tol": cfg.solver.residual_tol,
        }),
    )?;
    if run.emit_adjoint {
        let problem = run.problem()?;
        run.emit_adjoint(&problem, &p)?;
    }
    if !audit.holds(cfg.solver.residual_tol) {
        return Err(Failure::Verify(format!(
            "residual audit exceeds {} (see summary.json)",
            cfg.solver.residual_tol
        )));
    }
    Ok(())
}

fn generate(run: &Run) -> Outcome {
    let cfg = &run.cfg;
    let ic = cfg.initial_state()?;
    let spec = &cfg.observations;
    let (obs, _) = io::generate_observations(
        &cfg.true_parameters,
        &ic,
        &cfg.grid,
        &cfg.constants,
        &cfg.solver,
        &spec.noise,
        cfg.seed,
        (spec.mu1, spec.mu2),
    )?;
    io::write_observations(&run.path("observations.csv"), &cfg.grid, &obs)?;
    io::write_initial_condition(&run.path("initial_condition.json"), &ic)?;
    Ok(())
}

fn invert(run: &Run) -> Outcome {
    let cfg = &run.cfg;
    let problem = run.problem()?;
    let result = match minimize(&problem, &cfg.initial_guess, &cfg.optimizer) {
        Ok(r) => r,
        Err(aborted) => {
            io::write_trace(&run.path("trace.csv"), &aborted.trace)?;
            return Err(Failure::Core(aborted.source));
        }
    };
    io::write_trace(&run.path("trace.csv"), &result.trace)?;
    let truth = cfg.true_parameters.to_array();
    let rel: Vec<f64> = result
        .p_final
        .to_array()
        .iter()
        .zip(truth)
        .map(|(x, t)| {
            if t != 0.0 {
                (x - t).abs() / t.abs()
            } else {
                (x - t).abs()
            }
        })
        .collect();
    io::write_json(
        &run.path("result.json"),
        &json!({
            "initial_guess": cfg.initial_guess,
            "p_final": result.p_final,
            "j_final": result.j_final,
            "iterations": result.trace.len() - 1,
            "stopped_by": result.stopped_by,
            "step_size_warning": result.step_size_warning,
            "true_parameters": cfg.true_parameters,
            "relative_error": rel,
        }),
    )?;
    run.emit_adjoint(&problem, &result.p_final)
}

fn sweep(run: &Run) -> Outcome {
    let problem = run.problem()?;
    let result = io::sweep(&problem, &run.cfg.sweep)?;
    io::write_sweep(&run.path("sweep.csv"), &result)?;
    io::write_json(
        &run.path("sweep_summary.json"),
        &json!({
            "spec": result.spec,
            "argmin": result.argmin,
            "spacing": [result.spec.c_c.spacing(), result.spec.c_d.spacing()],
        }),
    )?;
    Ok(())
}

fn gradcheck(run: &Run) -> Outcome {
    let cfg = &run.cfg;
    let gc = cfg.gradcheck;
    let problem = run.problem()?;
    let mut points = vec![cfg.initial_guess];
    points.extend(sample_box(&cfg.optimizer.bounds, gc.random_points, cfg.seed));
    let reports = points
        .iter()
        .map(|p| grad_check(&problem, p, gc.h, gc.rel_tol, gc.abs_tol))
        .collect::<spheroid_core::Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.passed);
    io::write_json(
        &run.path("gradcheck.json"),
        &json!({ "passed": passed, "reports": reports }),
    )?;
    run.emit_adjoint(&problem, &cfg.initial_guess)?;
    for r in &reports {
        println!(
            "{} p = {:?} rel = {:?}",
            if r.passed { "PASS" } else { "FAIL" },
            r.p.to_array(),
            r.rel_errors
        );
    }
    if !passed {
        return Err(Failure::Verify(
            "adjoint gradient disagrees with finite differences".into(),
        ));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> (Outcome, &'static str) {
    let (args, name, f): (&Common, _, fn(&Run) -> Outcome) = match &cli.command {
        Command::Forward(a) => (a, "forward", forward),
        Command::Invert(a) => (a, "invert", invert),
        Command::Sweep(a) => (a, "sweep", sweep),
        Command::Gradcheck(a) => (a, "gradcheck", gradcheck),
        Command::Generate(a) => (a, "generate", generate),
    };
    (Run::new(args).and_then(|run| f(&run)), name)
}

fn config_path_hint(cli: &Cli) -> &Path {
    match &cli.command {
        Command::Forward(a) | Command::Invert(a) | Command::Sweep(a) | Command::Gradcheck(a) | Command::Generate(a) => {
            &a.config
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let start = Instant::now();
    let (outcome, name) = dispatch(&cli);
    eprintln!("{name}: {:.3} s wall", start.elapsed().as_secs_f64());
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error ({}): {e}", config_path_hint(&cli).display());
            ExitCode::from(if e.is_solver_failure() {
                EXIT_SOLVER
            } else {
                EXIT_CONFIG
            })
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
