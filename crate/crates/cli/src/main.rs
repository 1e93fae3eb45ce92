//! `sdlab` command-line driver.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "sdlab", version, about = "Singular-drift parabolic laboratory")]
struct Cli {
    /// JSON configuration for the chosen command; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the random seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "sdlab-out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the linear equation and write the field and its norms.
    Solve,
    /// Fundamental solution column and row at (s, t), with its bounds.
    Fundamental,
    /// Tabulate the a-priori bound functions over time.
    Bounds,
    /// Simulate the stochastic flow and estimate E[B], optionally against the PDE.
    Montecarlo,
    /// Run a verification sweep.
    Verify,
    /// Flipped-transport blow-up runs and the fitted slope.
    Counterexample,
    /// Iterated lower-bound series at one point.
    Gjseries,
    /// Search for a negative minimum of the nonlocal construction.
    Minprinciple,
    /// Validate a two-column time series CSV.
    Ingest {
        /// CSV file with a header row and columns t, g.
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = commands::Context { config: cli.config, seed: cli.seed, out: cli.out };
    let result = match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Fundamental => commands::fundamental(&ctx),
        Command::Bounds => commands::bounds(&ctx),
        Command::Montecarlo => commands::montecarlo(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Counterexample => commands::counterexample(&ctx),
        Command::Gjseries => commands::gjseries(&ctx),
        Command::Minprinciple => commands::minprinciple(&ctx),
        Command::Ingest { input } => commands::ingest(&ctx, &input),
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.message);
            println!("manifest: {}", outcome.manifest.display());
            if outcome.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
