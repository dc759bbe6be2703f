//! `dsslab`: batch front-end for discretely self-similar Navier-Stokes runs.
//!
//! Exit codes: 0 success, 1 runtime error, 2 invalid configuration or input,
//! 3 continuation stall, 4 failed audit.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use run::{Failure, Suite};

/// Environment variable giving the default worker count.
const THREADS_ENV: &str = "DSSLAB_THREADS";
/// Negative-control hook: when set to 1, the kernels are built with a sign
/// error so that the kernel audit must fail.
const SIGN_FAULT_ENV: &str = "DSSLAB_KERNEL_SIGN_FAULT";

#[derive(Parser)]
#[command(name = "dsslab", version, about = "Discretely self-similar Navier-Stokes solver and audits")]
struct Cli {
    /// Run configuration (`key = value` with `[section]` headers); defaults if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the DSSLAB_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed of the initial datum; overrides `data.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the DSS correction by continuation to sigma_target.
    Solve,
    /// Run an audit suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// Evaluate the DSS extension of a snapshot at query points.
    Extend {
        /// Field snapshot written by `solve`.
        #[arg(long)]
        snapshot: PathBuf,
        /// CSV of query points with columns x1,x2,x3,t.
        #[arg(long)]
        points: PathBuf,
    },
    /// Aggregate the verdicts found in the output directory.
    Report,
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Config(e.0))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.data.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());

    let env_threads = match std::env::var(THREADS_ENV) {
        Ok(s) => Some(s.parse::<usize>().map_err(|e| Failure::Config(format!("{THREADS_ENV}={s}: {e}")))?),
        Err(_) => None,
    };
    if let Some(n) = cli.threads.or(env_threads) {
        if n == 0 {
            return Err(Failure::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    if std::env::var(SIGN_FAULT_ENV).is_ok_and(|v| v == "1") {
        dss_core::kernels::set_sign_fault(true);
    }

    match cli.command {
        Command::Solve => run::run_solve(&config, &out),
        Command::Verify { suite } => run::run_verify(&config, suite, &out),
        Command::Extend { snapshot, points } => run::run_extend(&config, &snapshot, &points, &out),
        Command::Report => run::run_report(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dsslab: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
