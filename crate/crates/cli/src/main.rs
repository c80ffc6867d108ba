//! `ssp-pac`: command-line front end.
//!
//! Exit codes: 0 on success, 1 when an algorithm fails or a `verify` check
//! does not hold, 2 on invalid input (including argument parse errors).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssp_pac::pac::DEFAULT_ALPHA;

#[derive(Parser, Debug)]
#[command(name = "ssp-pac", version, about = "PAC planning for stochastic shortest path problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an environment and write it as MDP JSON.
    Gen(GenArgs),
    /// Solve a model exactly: optimal values, policy and model scalars.
    SolveExact {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the positive-cost PAC solver against a simulated generative model.
    PacPositive(PacArgs),
    /// Run the restricted PAC solver; needs `--theta`.
    PacRestricted(PacArgs),
    /// Estimate the SSP diameter; `--eps` is the relative accuracy.
    EstimateDiameter(PacArgs),
    /// Check a policy for epsilon-optimality and/or EVI certificates on counts.
    Verify(VerifyArgs),
    /// Run replicated experiments or an epsilon / c_min scaling grid.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub family: Family,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Family {
    /// Random sparse model with a proper policy.
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        support: usize,
        #[arg(long, default_value_t = 0.0)]
        c_min: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Line of `n` states; each step advances with probability `1 - slip`.
    Chain {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        slip: f64,
        #[arg(long, default_value_t = 1.0)]
        cost: f64,
    },
    /// Unit-cost grid with the goal in a corner.
    Gridworld {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 0.0)]
        slip: f64,
    },
    /// The checked-in positive-cost fixture.
    FixtureA,
    /// The checked-in zero-cost fixture with an improper trap.
    FixtureB,
}

#[derive(Args, Debug)]
pub struct PacArgs {
    #[arg(long)]
    pub mdp: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run log JSON; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub mdp: PathBuf,
    /// Policy JSON: an action array or a run log with a `policy` field.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Judge against the restricted optimum instead of the optimum.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Empirical counts JSON; runs EVI on them and checks its certificates.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// EVI stopping precision used with `--counts`.
    #[arg(long, default_value_t = 0.01)]
    pub mu: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlgorithmArg {
    Exact,
    PacPositive,
    PacRestricted,
    EstimateDiameter,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["mdp", "config", "scaling"]))]
pub struct BenchArgs {
    /// Model file for a replicated experiment built from flags.
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    /// Experiment config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scaling grid JSON; writes a CSV to `--out`.
    #[arg(long)]
    pub scaling: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pac-positive")]
    pub algorithm: AlgorithmArg,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub reps: u32,
    /// Output directory for experiments, CSV file for scaling grids.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(commands::Status::Pass) => ExitCode::SUCCESS,
        Ok(commands::Status::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
