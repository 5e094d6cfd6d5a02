//! `rh`: command-line front end for the harvesting model
//! `z' = a(t) z - b(t) z^2 - k gamma(t)`.

mod commands;
mod config;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rh_core::Error;

#[derive(Parser, Debug)]
#[command(name = "rh", version, about = "Logistic equation with harvesting: solve, classify, critical harvesting, periodic branches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    Solve,
    /// Long-time fate of a Bernoulli solution, or the case split at the critical level when `--p` is given.
    Classify,
    /// Bisection for the critical harvesting level on `[k-lo, k-hi]`.
    CriticalK,
    /// Verdict on `int_0^inf exp(int (a - 2p))` for a particular solution `p`.
    SeparationTest,
    /// The negative solution `z(0) = -1/J` of the Bernoulli equation.
    SpecialSolution,
    /// Periodic solutions: fixed points at `--k`, otherwise a branch diagram.
    Periodic,
    /// Recompute the worked examples and compare with the expected values.
    ReproducePaper,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Growth coefficient a(t).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Harvesting profile gamma(t).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// Quadratic coefficient b(t) (default 1).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// A known solution p(t) at the given k.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub k: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub z0: Option<f64>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub period: Option<f64>,
    #[arg(long, global = true)]
    pub k_lo: Option<f64>,
    #[arg(long, global = true)]
    pub k_hi: Option<f64>,
    /// Spacing of the k grid for branch diagrams.
    #[arg(long, global = true)]
    pub k_step: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Number of output intervals for sampled CSV.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Flat `key = value` file; flags on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated row ids for reproduce-paper.
    #[arg(long, global = true)]
    pub rows: Option<String>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    BlowDown(f64),
    Bracket(String),
    Reproduction(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::BlowDown(_) => 3,
            Failure::Bracket(_) => 4,
            Failure::Reproduction(_) => 5,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => format!("error: {m}"),
            Failure::BlowDown(t) => format!("blow-down at t_est = {t}"),
            Failure::Bracket(m) => format!("error: {m}"),
            Failure::Reproduction(m) => format!("reproduction failed: {m}"),
            Failure::Runtime(m) => format!("error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::Eval(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            Error::InvalidBracket(_) => Failure::Bracket(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<(), Failure> {
        let mut flags = cli.flags.clone();
        if let Some(path) = flags.config.clone() {
            config::merge_file(&mut flags, &path)?;
        }
        commands::run(cli.command, &flags)
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
