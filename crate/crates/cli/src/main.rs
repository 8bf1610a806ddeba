use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod discover;
mod manifest;
mod oracle;
mod simulate;

/// Find covariate adjustment sets from conditional independence tests.
#[derive(Parser, Debug)]
#[command(name = "adjset", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search a dataset for adjustment sets.
    Discover(DiscoverArgs),
    /// Run a simulation study from a TOML config.
    Simulate(SimulateArgs),
    /// Exact graph queries on a declared DAG.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct DiscoverArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Graph file with a `# tiers:` directive, or a document with a
    /// `tiers: [..] [..]` line.
    #[arg(long)]
    pub knowledge: PathBuf,
    /// Treatments in their causal order.
    #[arg(long, num_args = 1.., required = true)]
    pub treatments: Vec<String>,
    #[arg(long)]
    pub outcome: String,
    #[arg(long, default_value = "combine", value_parser = ["entner", "build", "combine"])]
    pub method: String,
    /// Single threshold (default 0.05).
    #[arg(long, conflicts_with_all = ["alpha_dep", "alpha_indep"])]
    pub alpha: Option<f64>,
    /// Dependence threshold of the mixed policy.
    #[arg(long, requires = "alpha_indep")]
    pub alpha_dep: Option<f64>,
    /// Independence threshold of the mixed policy.
    #[arg(long, requires = "alpha_dep")]
    pub alpha_indep: Option<f64>,
    /// Candidate covariates. Defaults to every tiered column before the
    /// first treatment.
    #[arg(long, num_args = 1..)]
    pub pool: Option<Vec<String>>,
    /// Report every distinct set instead of stopping at the first.
    #[arg(long)]
    pub all: bool,
    /// Largest conditioning set to try.
    #[arg(long)]
    pub max_cond_size: Option<usize>,
    /// Add certificates for c-equivalent sets.
    #[arg(long)]
    pub expand: bool,
    /// Annotate the remaining covariates as precision or overadjustment.
    #[arg(long)]
    pub classify: bool,
    /// Recorded in the manifest; the search itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every CI test run to `trace.txt`.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `generator.seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run trials on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(subcommand)]
    pub query: OracleQuery,
}

#[derive(Subcommand, Debug)]
pub enum OracleQuery {
    /// Is `a` d-separated from `b` given the nodes after `--`?
    Dsep {
        a: String,
        b: String,
        #[arg(last = true)]
        cond: Vec<String>,
    },
    /// Is `z` an adjustment set relative to (`x`, `y`)?
    Adjust {
        #[arg(long, num_args = 1.., required = true)]
        x: Vec<String>,
        #[arg(long, num_args = 1.., required = true)]
        y: Vec<String>,
        #[arg(long, num_args = 0..)]
        z: Vec<String>,
    },
    /// Every adjustment set inside the pool.
    Enumerate {
        #[arg(long, num_args = 1.., required = true)]
        x: Vec<String>,
        #[arg(long, num_args = 1.., required = true)]
        y: Vec<String>,
        /// Defaults to every observed node outside `x` and `y`.
        #[arg(long, num_args = 0..)]
        pool: Option<Vec<String>>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Discover(args) => discover::run(&args, &argv),
        Command::Simulate(args) => simulate::run(&args, &argv),
        Command::Oracle(args) => oracle::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
