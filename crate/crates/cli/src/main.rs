//! `eicalg`: derive influence curves, verify the operator identities,
//! estimate from data and run Monte Carlo efficiency studies.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "eicalg",
    version,
    about = "Exact operator algebra for efficient influence curves"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Output::Text, global = true)]
    output: Output,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    NegatedCentering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Bernoulli,
    Discrete,
    UniformGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Plugin,
    Onestep,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the efficient influence curve of a functional.
    Derive {
        #[arg(allow_hyphen_values = true)]
        expression: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
    },
    /// Check an identity suite on seeded random instances and symbolically.
    Verify(VerifyArgs),
    /// Plug-in estimate, EIC standard error and Wald interval from a CSV file.
    Estimate {
        #[arg(allow_hyphen_values = true)]
        expression: String,
        /// Comma-separated data with a header of column names.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        /// Also report the sample-split one-step estimate with this first-fold share.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Monte Carlo study of an estimator against the efficiency bound.
    Simulate(SimulateArgs),
    /// Parse an expression, print it back and check the round trip.
    ParseCheck {
        #[arg(allow_hyphen_values = true)]
        expression: String,
    },
}

#[derive(Args)]
pub struct VerifyArgs {
    /// decomposition, brackets, corollaries, lemma, jacobi, eic-certificates or all.
    pub suite: String,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..=64))]
    pub max_outcomes: u64,
    /// Run trials on one thread.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<Fault>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON configuration; inline flags are ignored when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Bernoulli success probability, e.g. 0.3 or 3/10.
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated support points of a discrete law.
    #[arg(long)]
    pub support: Option<String>,
    /// Comma-separated weights of a discrete law.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub low: Option<String>,
    #[arg(long)]
    pub high: Option<String>,
    #[arg(long)]
    pub points: Option<u32>,
    #[arg(long, default_value = "E[X]")]
    pub estimand: String,
    #[arg(long, default_value = "X")]
    pub variable: String,
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    #[arg(long, default_value_t = 200)]
    pub replicates: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Plugin)]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long)]
    pub sequential: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.output;
    let status = match cli.command {
        Command::Derive { expression, mode } => run::derive(&expression, mode, out),
        Command::Verify(args) => run::verify(&args, out),
        Command::Estimate {
            expression,
            data,
            level,
            mode,
            split,
        } => run::estimate(&expression, &data, level, mode, split, out),
        Command::Simulate(args) => run::simulate(&args, out),
        Command::ParseCheck { expression } => run::parse_check(&expression, out),
    };
    match status {
        Ok(code) => code.into(),
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code.into()
        }
    }
}
