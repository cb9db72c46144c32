//! `sewcx`: batch runner for correlator, sewing and complex jobs.
//!
//! Exit status: 0 success, 1 computation error, 2 schema error,
//! 3 a check ran and failed.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use run::Mode;

#[derive(Parser)]
#[command(name = "sewcx", version, about = "Exact correlator, sewing and coboundary computations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON job description.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Rational)]
    mode: ModeArg,
    /// Seed for jittered sample points in `convergence`; off by default.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    Correlator,
    Sew,
    CheckComplex,
    Convergence,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Correlator => "correlator",
            Command::Sew => "sew",
            Command::CheckComplex => "check-complex",
            Command::Convergence => "convergence",
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Rational,
    Numeric,
}

const SCHEMA: u8 = 2;
const COMPUTATION: u8 = 1;
const CHECK_FAILED: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match cli.mode {
        ModeArg::Rational => Mode::Rational,
        ModeArg::Numeric => Mode::Numeric,
    };
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(SCHEMA);
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", path.display());
            return ExitCode::from(SCHEMA);
        }
    };
    let job = match check_command(&text, cli.command).and_then(|_| run::prepare(&text, mode)) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("schema error: {e:#}");
            return ExitCode::from(SCHEMA);
        }
    };
    match run::execute(&job, mode, cli.seed, &cli.out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed; see {}", cli.out.join("report.json").display());
            ExitCode::from(CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(COMPUTATION)
        }
    }
}

/// The subcommand and the config's `command` field must agree.
fn check_command(text: &str, cmd: Command) -> anyhow::Result<()> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    match v.get("command").and_then(|c| c.as_str()) {
        Some(c) if c == cmd.name() => Ok(()),
        Some(c) => anyhow::bail!("config is for `{c}` but `{}` was invoked", cmd.name()),
        None => anyhow::bail!("config has no \"command\" field"),
    }
}
