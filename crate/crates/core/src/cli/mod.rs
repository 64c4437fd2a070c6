//! The `kplab` command line.
//!
//! ```text
//! kplab <command> [--config FILE] [--seed N] [--out DIR] [--policy auto|quadrature|mc]
//!                 [--samples N] [--tol X]
//! ```
//!
//! Flags override the corresponding config-file fields. Every run writes its
//! CSV tables and a `manifest.json` into the output directory. Exit codes:
//! 0 when every check holds, 2 when some check fails, 1 on errors.
//! `KPLAB_THREADS` sets the worker thread count.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussmix::{EstimatorPolicy, PolicyMode};
use crate::suite::{self, SuiteOptions, CRITERIA};

pub use commands::{Output, Plan};
pub use config::ExperimentConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_VIOLATION: u8 = 2;
pub const THREADS_ENV: &str = "KPLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Entropy,
    KpVerify,
    Flow,
    Minty,
    Costa,
    Capacity,
    Volume,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Entropy => "entropy",
            Command::KpVerify => "kp-verify",
            Command::Flow => "flow",
            Command::Minty => "minty",
            Command::Costa => "costa",
            Command::Capacity => "capacity",
            Command::Volume => "volume",
            Command::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Auto,
    Quadrature,
    Mc,
}

impl From<PolicyArg> for PolicyMode {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Auto => PolicyMode::Auto,
            PolicyArg::Quadrature => PolicyMode::Quadrature,
            PolicyArg::Mc => PolicyMode::MonteCarlo,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kplab",
    version,
    about = "Entropy comparisons for contracted point configurations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

/// Flags shared by every command.
#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default `kplab-out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Command tolerance (Blahut–Arimoto bracket, flow band).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Criteria to run (`suite` only); all by default.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<u32>>,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Rényi entropies of a smoothed configuration.
    Entropy(RunArgs),
    /// Entropy comparison for a contraction pair.
    KpVerify(RunArgs),
    /// Functionals, divergence and velocities along the lifted flow.
    Flow(RunArgs),
    /// Monotone extension to one more point.
    Minty(RunArgs),
    /// Entropy-power concavity, A(β) and the Lipschitz-weighted inequality.
    Costa(RunArgs),
    /// Blahut–Arimoto capacity of a finite alphabet.
    Capacity(RunArgs),
    /// Volume of a union of balls.
    Volume(RunArgs),
    /// The full acceptance battery.
    Suite(RunArgs),
}

impl Sub {
    pub fn split(self) -> (Command, RunArgs) {
        match self {
            Sub::Entropy(a) => (Command::Entropy, a),
            Sub::KpVerify(a) => (Command::KpVerify, a),
            Sub::Flow(a) => (Command::Flow, a),
            Sub::Minty(a) => (Command::Minty, a),
            Sub::Costa(a) => (Command::Costa, a),
            Sub::Capacity(a) => (Command::Capacity, a),
            Sub::Volume(a) => (Command::Volume, a),
            Sub::Suite(a) => (Command::Suite, a),
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'static str,
    version: &'static str,
    seed: u64,
    policy: EstimatorPolicy,
    config: &'a ExperimentConfig,
    files: Vec<String>,
    violations: usize,
    row_errors: usize,
    exit_code: u8,
    threads: usize,
    wall_time_seconds: f64,
}

/// Merge flags over the config file.
pub fn plan(args: &RunArgs) -> Result<Plan> {
    let config = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let mut policy = config.policy.unwrap_or_default();
    if let Some(p) = args.policy {
        policy.mode = p.into();
    }
    if let Some(n) = args.samples {
        policy.samples = n;
    }
    policy.seed = seed;
    let tol = args.tol.or(config.tol);
    if let Some(t) = tol {
        if !(t > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {t}")));
        }
    }
    Ok(Plan {
        config,
        policy,
        seed,
        tol,
    })
}

fn run_command(cmd: Command, plan: &Plan, args: &RunArgs, out_dir: &Path) -> Result<Output> {
    match cmd {
        Command::Entropy => commands::entropy(plan),
        Command::KpVerify => commands::kp_verify(plan),
        Command::Flow => commands::flow(plan),
        Command::Minty => commands::minty(plan),
        Command::Costa => commands::costa(plan),
        Command::Capacity => commands::capacity(plan),
        Command::Volume => commands::volume(plan),
        Command::Suite => {
            let opts = SuiteOptions {
                seed: plan.seed,
                samples: plan.policy.samples,
                mode: plan.policy.mode,
                ..Default::default()
            };
            let ids = args.only.clone().unwrap_or_else(|| CRITERIA.to_vec());
            let outcomes = suite::run_suite(&opts, &ids, out_dir)?;
            // the suite writes its own tables
            let mut out = Output::default();
            for o in &outcomes {
                println!("{}", o.line());
                out.violations += usize::from(!(o.passed && o.within_runtime()));
            }
            Ok(out)
        }
    }
}

fn write_outputs(
    cmd: Command,
    plan: &Plan,
    out: &Output,
    out_dir: &Path,
    code: u8,
    start: Instant,
) -> Result<()> {
    let mut files = Vec::new();
    for (name, t) in &out.tables {
        t.write(&out_dir.join(name))?;
        files.push(name.clone());
    }
    if cmd == Command::Suite {
        let mut names: Vec<String> = std::fs::read_dir(out_dir)
            .map_err(|e| Error::Io(e.to_string()))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        files = names;
    }
    let manifest = Manifest {
        command: cmd.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: plan.seed,
        policy: plan.policy,
        config: &plan.config,
        files,
        violations: out.violations,
        row_errors: out.errors,
        exit_code: code,
        threads: rayon::current_num_threads(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    std::fs::write(out_dir.join("manifest.json"), text + "\n").map_err(|e| Error::Io(e.to_string()))
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| {
        Error::Config(format!(
            "{THREADS_ENV} must be a positive integer, got {v:?}"
        ))
    })?;
    // a second call in the same process (tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Failed checks outrank row errors.
pub fn exit_code(out: &Output) -> u8 {
    if out.violations > 0 {
        EXIT_VIOLATION
    } else if out.errors > 0 {
        EXIT_ERROR
    } else {
        EXIT_OK
    }
}

/// Run one command and return its exit code.
pub fn execute(cmd: Command, args: &RunArgs) -> Result<u8> {
    let start = Instant::now();
    configure_threads()?;
    let plan = plan(args)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| plan.config.out.clone())
        .unwrap_or_else(|| PathBuf::from("kplab-out"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let out = run_command(cmd, &plan, args, &out_dir)?;
    let code = exit_code(&out);
    write_outputs(cmd, &plan, &out, &out_dir, code, start)?;
    eprintln!(
        "{}: {} violation(s), {} row error(s); output in {}",
        cmd.name(),
        out.violations,
        out.errors,
        out_dir.display()
    );
    Ok(code)
}

/// Entry point of the `kplab` binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, args) = cli.command.split();
    match execute(cmd, &args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
