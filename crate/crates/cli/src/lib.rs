//! Command-line front end for `mpray`: configuration, subcommands and the
//! verification suite.
//!
//! Exit codes: 0 when every check passes, 1 on a failed check, 2 on a usage,
//! configuration or input error, 3 on a numerical failure (non-convergence,
//! trapped ray, step underflow).

#![allow(clippy::needless_range_loop, clippy::redundant_guards)]

pub mod commands;
pub mod config;
pub mod fields;
pub mod record;
pub mod verify;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::record::RunRecord;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },
    #[error(transparent)]
    Core(#[from] mpray::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mpray",
    version,
    about = "Geodesic flows, ray transforms and boundary actions of magnetic systems with potential"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for output files; without it the main output goes to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// RNG seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Reproducible output: no wall-clock time in the run record.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run every check and write the run record.
    Verify,
    /// Integrate one ray and write its trajectory as CSV.
    Integrate,
    /// Ray transform of a triple over the boundary fan (sinogram CSV).
    Transform,
    /// Boundary action table (CSV).
    Action,
    /// Both sides of Santaló's formula (JSON).
    Santalo,
    /// Curvature functional of the reduced system (JSON).
    Curvature,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Integrate => "integrate",
            Command::Transform => "transform",
            Command::Action => "action",
            Command::Santalo => "santalo",
            Command::Curvature => "curvature",
        }
    }
}

fn execute(
    cli: &Cli,
) -> Result<(RunRecord, Vec<commands::Artifact>, Option<mpray::Error>), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let mut cfg = config::load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let sys = cfg.build_system()?;
    let start = Instant::now();
    let run = |cfg: &RunConfig| -> Result<Outcome, CliError> {
        match cli.command {
            Command::Verify => commands::cmd_verify(&sys, cfg),
            Command::Integrate => commands::cmd_integrate(&sys, cfg),
            Command::Transform => commands::cmd_transform(&sys, cfg),
            Command::Action => commands::cmd_action(&sys, cfg),
            Command::Santalo => commands::cmd_santalo(&sys, cfg),
            Command::Curvature => commands::cmd_curvature(&sys, cfg),
        }
    };
    let outcome = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {t} threads: {e}")))?
            .install(|| run(&cfg))?,
        None => run(&cfg)?,
    };
    let pass = outcome.checks.iter().all(|c| c.pass);
    let record = RunRecord {
        command: cli.command.name().to_string(),
        config: cfg,
        checks: outcome.checks,
        outputs: outcome.outputs,
        pass,
        wall_time_seconds: (!cli.deterministic).then(|| start.elapsed().as_secs_f64()),
    };
    Ok((record, outcome.artifacts, outcome.numerical))
}

fn emit(cli: &Cli, record: &RunRecord, artifacts: &[commands::Artifact]) -> Result<(), CliError> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for a in artifacts {
                std::fs::write(dir.join(a.name), &a.bytes)?;
            }
            std::fs::write(dir.join("record.json"), record.to_json())?;
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            match artifacts.first() {
                Some(a) => out.write_all(&a.bytes)?,
                None => out.write_all(record.to_json().as_bytes())?,
            }
        }
    }
    Ok(())
}

/// Run the command line and return the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = execute(cli).and_then(|(record, artifacts, numerical)| {
        emit(cli, &record, &artifacts)?;
        Ok((record.pass, numerical))
    });
    match result {
        Ok((_, Some(e))) => {
            eprintln!("error: {e}");
            EXIT_NUMERICAL
        }
        Ok((true, None)) => EXIT_OK,
        Ok((false, None)) => {
            eprintln!("one or more checks failed");
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
