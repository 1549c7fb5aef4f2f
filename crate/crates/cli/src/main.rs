//! `teps` command-line tool: simulation, inference, estimation, selection,
//! replication, and counterfactual evaluation over CSV/JSON artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teps_cli::config::RunConfig;
use teps_cli::{stages, CliError};

#[derive(Parser)]
#[command(
    name = "teps",
    version,
    about = "Matching-market simulation and robust preference inference"
)]
struct Cli {
    /// Config file of `key = value` lines (default: $TEPS_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count override (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Attention grid override, e.g. `20,40,60,80,100`.
    #[arg(long, global = true)]
    tau_grid: Option<String>,

    /// Significance level override for the selection ladder.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate per-draw admission cutoffs on submitted lists.
    SimulateCutoffs,
    /// Build per-student feasible-set partitions.
    Partition,
    /// Infer preference relations (WTT or stability-based).
    Infer,
    /// Estimate the random-utility model by Gibbs sampling.
    Estimate,
    /// Run the sequential testing ladder over estimate summaries.
    Select,
    /// Full synthetic replication pipeline with table output.
    Montecarlo,
    /// Evaluate an admission-policy counterfactual from posterior draws.
    Counterfactual,
    /// Summarize the artifacts in the output directory.
    Report,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match cli
        .config
        .or_else(|| std::env::var_os("TEPS_CONFIG").map(PathBuf::from))
    {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_override("seed", seed.to_string());
    }
    if let Some(threads) = cli.threads {
        cfg.set_override("threads", threads.to_string());
    }
    if let Some(grid) = cli.tau_grid {
        cfg.set_override("tau_grid", grid);
    }
    if let Some(alpha) = cli.alpha {
        cfg.set_override("alpha", alpha.to_string());
    }
    if let Some(threads) = cfg.get("threads") {
        let threads: usize = threads
            .parse()
            .map_err(|_| CliError::validation(format!("threads {threads:?} is not a number")))?;
        // Ignore failure: the global pool may already exist in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match cli.command {
        Command::SimulateCutoffs => stages::simulate_cutoffs(&cfg),
        Command::Partition => stages::partition(&cfg),
        Command::Infer => stages::infer(&cfg),
        Command::Estimate => stages::estimate(&cfg),
        Command::Select => stages::select(&cfg),
        Command::Montecarlo => stages::montecarlo(&cfg),
        Command::Counterfactual => stages::counterfactual(&cfg),
        Command::Report => stages::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(produced) => {
            for path in produced {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
