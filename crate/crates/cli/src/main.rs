//! `lctrace` command-line driver.
//!
//! Exit status: 0 when a run stops at a stationary point or a check passes,
//! 2 when a run hits the iteration cap, 1 on any error or failed check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod manifest;
mod suite;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lctrace::check::check_trace;
use lctrace::lc_trace::{run_first_order, RunOutcome};
use lctrace::problem::ProblemInstance;
use lctrace::second_order::run_second_order;
use lctrace::trace::{Algorithm, Termination, Trace};
use lctrace::{Error, Result};

use manifest::RunManifest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_CAP: u8 = 2;

#[derive(Parser)]
#[command(
    name = "lctrace",
    version,
    about = "Trust-region solver for linearly constrained nonconvex problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    First,
    Second,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::First => Algorithm::FirstOrder,
            AlgoArg::Second => Algorithm::SecondOrder,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver on one instance.
    Solve(SolveArgs),
    /// Replay a trace through the invariant checker.
    Check {
        #[arg(long)]
        trace: PathBuf,
        /// Also print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Compare the exact solvers with the grid oracle.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        resolution: f64,
        /// Trust-region radius of the compared subproblems.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Number of random feasible points besides the start.
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every `*.manifest.json` in a directory.
    Suite {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// First write this many random instances and manifests into the directory.
        #[arg(long)]
        generate: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Start from a manifest; other flags override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long)]
    eps_g: Option<f64>,
    #[arg(long)]
    eps_h: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the effective manifest here.
    #[arg(long)]
    write_manifest: Option<PathBuf>,
}

impl SolveArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = match &self.manifest {
            Some(p) => RunManifest::read(p)?,
            None => RunManifest::new(self.instance.clone().unwrap_or_default(), Algorithm::FirstOrder),
        };
        if let Some(p) = &self.instance {
            m.instance = p.clone();
        }
        if let Some(a) = self.algo {
            m.algorithm = a.into();
        }
        let o = &mut m.overrides;
        o.eps_g = self.eps_g.or(o.eps_g);
        o.eps_h = self.eps_h.or(o.eps_h);
        o.max_iterations = self.max_iter.or(o.max_iterations);
        if self.trace.is_some() {
            m.trace = self.trace.clone();
        }
        if self.summary.is_some() {
            m.summary = self.summary.clone();
        }
        m.seed = self.seed.unwrap_or(m.seed);
        Ok(m)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Check { trace, json } => cmd_check(&trace, json),
        Command::Verify {
            instance,
            resolution,
            delta,
            points,
            seed,
        } => verify::cmd_verify(&instance, resolution, delta, points, seed),
        Command::Suite {
            dir,
            jobs,
            generate,
            seed,
        } => suite::cmd_suite(&dir, jobs, generate, seed),
    };
    ExitCode::from(code)
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ProblemInstance::from_json_str(&text)
}

/// Runs a manifest and writes its outputs.
pub fn execute(m: &RunManifest) -> Result<RunOutcome> {
    let instance = load_instance(&m.instance)?;
    let out = match m.algorithm {
        Algorithm::FirstOrder => run_first_order(&instance, m.first_order_config())?,
        Algorithm::SecondOrder => run_second_order(&instance, m.second_order_config())?,
    };
    if let Some(p) = &m.trace {
        out.trace.write(p)?;
    }
    if let Some(p) = &m.summary {
        let text = serde_json::to_string_pretty(&out.trace.summary).expect("summary serializes");
        std::fs::write(p, text + "\n")?;
    }
    Ok(out)
}

pub fn exit_code(t: &Termination) -> u8 {
    match t {
        Termination::FirstOrderStationary | Termination::SecondOrderStationary => EXIT_OK,
        Termination::IterationCap => EXIT_CAP,
        Termination::Failed { .. } => EXIT_ERROR,
    }
}

fn cmd_solve(args: &SolveArgs) -> u8 {
    let m = match args.manifest() {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    if let Some(p) = &args.write_manifest {
        if let Err(e) = m.write(p) {
            return fail(e);
        }
    }
    let out = match execute(&m) {
        Ok(out) => out,
        Err(e) => return fail(e),
    };
    let s = out.trace.summary.as_ref().expect("finished runs carry a summary");
    let x: Vec<String> = s.final_x.iter().map(|v| format!("{v:.10}")).collect();
    println!("termination: {}", termination_name(&s.termination));
    println!("iterations: {}", s.iterations);
    println!("subproblem solves: {}", s.subproblem_solves);
    println!("f: {:.12e}", s.final_f);
    println!("chi: {:.3e}", s.final_chi);
    if let Some(psi) = s.final_psi {
        println!("psi: {psi:.3e}");
    }
    println!("x: [{}]", x.join(", "));
    if let Termination::Failed { message } = &s.termination {
        eprintln!("error: {message}");
    }
    exit_code(&s.termination)
}

pub fn termination_name(t: &Termination) -> &'static str {
    match t {
        Termination::FirstOrderStationary => "first_order_stationary",
        Termination::SecondOrderStationary => "second_order_stationary",
        Termination::IterationCap => "iteration_cap",
        Termination::Failed { .. } => "failed",
    }
}

fn cmd_check(path: &Path, json: bool) -> u8 {
    let trace = match Trace::read(path) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let report = check_trace(&trace);
    for inv in &report.invariants {
        let status = match (inv.passed(), inv.fatal) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        let margin = inv.worst_margin.map_or("-".to_string(), |m| format!("{m:.3e}"));
        print!(
            "{status} {:<20} checked={:<5} worst_margin={:<11} {}",
            inv.id, inv.checked, margin, inv.title
        );
        if !inv.passed() {
            print!(" (records {:?})", inv.violations);
        }
        println!();
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    }
    if report.passed() {
        println!("check passed");
        EXIT_OK
    } else {
        let names: Vec<&str> = report.failures().map(|f| f.title).collect();
        println!("check failed: {}", names.join("; "));
        EXIT_ERROR
    }
}

fn fail(e: Error) -> u8 {
    eprintln!("error: {e}");
    EXIT_ERROR
}
