//! The `optir` command line and the HTTP scenario service.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

mod commands;
pub mod serve;

pub use commands::{run, Failure};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// The IR or a patch list failed validation.
    pub const INVALID: i32 = 1;
    /// An input could not be read or parsed, or the arguments are wrong.
    pub const INPUT: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const UNBOUNDED: i32 = 4;
    /// Time or node limit reached with a feasible but unproven solution.
    pub const LIMIT_FEASIBLE: i32 = 5;
    /// Solver error, limit reached without a solution, or an expansion or
    /// write failure.
    pub const ERROR: i32 = 6;
}

#[derive(Debug, Parser)]
#[command(name = "optir", version, about = "Compile, solve and explore optimization models written in the JSON IR")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate an IR file.
    Validate(ValidateArgs),
    /// Compile against CSV data, write model.lp and solve.
    Solve(SolveArgs),
    /// Print variable and row counts without solving.
    Stats(StatsArgs),
    /// Apply a patch list to a solved base instance and diff the results.
    Whatif(WhatifArgs),
    /// Generate a synthetic instance directory.
    Gen(GenArgs),
    /// Serve the base instance and scenarios over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub ir: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

/// IR file, data directory and compile flags shared by several commands.
#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    pub ir: PathBuf,
    /// Directory of CSV tables.
    pub data: PathBuf,
    /// JSON object mapping variable groups to dimension labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Expand constraint families on a single thread.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args, Clone)]
pub struct SolverArgs {
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Branch-and-bound node limit.
    #[arg(long)]
    pub node_limit: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub feasibility_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub integrality_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub gap_tol: f64,
    /// Solver progress on standard error.
    #[arg(long)]
    pub solver_log: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Stream model.lp and stats.json, skip solving.
    #[arg(long)]
    pub lp_only: bool,
    /// Also write stats.json and print it.
    #[arg(long)]
    pub stats: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct WhatifArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON array of patches.
    pub patches: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Number of largest variable changes listed in the diff.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Lp,
    Mip,
    Assignment,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub family: FamilyArg,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub dcs: Option<usize>,
    #[arg(long)]
    pub customers: Option<usize>,
    #[arg(long)]
    pub products: Option<usize>,
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long)]
    pub site_fanout: Option<usize>,
    #[arg(long)]
    pub dc_fanout: Option<usize>,
    #[arg(long)]
    pub carriers: Option<usize>,
    #[arg(long)]
    pub shipments: Option<usize>,
    /// Generator parameter override, `key=<json value>`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Scenarios solved concurrently.
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}
