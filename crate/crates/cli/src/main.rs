mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use metasub::subspace::AnalysisMethod;

use commands::{AnalyzeOptions, Common, ReconstructOptions};

#[derive(Parser)]
#[command(name = "metasub", version, about = "Meta-train small networks and measure the dimension of their task-adapted parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON run configuration. Defaults to the snapshot in the run directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

impl From<CommonArgs> for Common {
    fn from(a: CommonArgs) -> Self {
        Common { config: a.config, seed: a.seed, out: a.out, force: a.force }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pca,
    Isomap,
}

#[derive(Subcommand)]
enum Command {
    /// Meta-train and write a checkpoint plus training history.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Adapt to fresh tasks and write the adapted-parameter matrix.
    Collect {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint JSON; defaults to `<out>/checkpoint.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        n_tasks: Option<usize>,
    },
    /// Dimension spectrum of the adapted parameters.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Matrix file; defaults to `<out>/adapted.bin`.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "pca")]
        method: Method,
        /// Largest k scanned.
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        n_neighbors: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Also write a 2-D embedding.
        #[arg(long)]
        embedding: bool,
        /// Also write per-parameter mean absolute differences between tasks.
        #[arg(long)]
        paramdiff: bool,
    },
    /// Probe how well PCA codes of size k identify the task.
    Reconstruct {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Comma-separated embedding sizes.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Comma-separated probe seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Control run: codes are permuted across tasks.
        #[arg(long)]
        shuffle: bool,
    },
    /// Verify artifact hashes and summarize a run directory.
    Report {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the JSON schema of the configuration file.
    Schema,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("METASUB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("METASUB_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|_| run(cli.command)) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { common } => commands::train(&common.into()),
        Command::Collect { common, checkpoint, n_tasks } => {
            commands::collect(&common.into(), checkpoint.as_deref(), n_tasks)
        }
        Command::Analyze { common, matrix, method, k_max, n_neighbors, threshold, embedding, paramdiff } => {
            let method = match method {
                Method::Pca => AnalysisMethod::Pca,
                Method::Isomap => AnalysisMethod::Isomap,
            };
            let opts = AnalyzeOptions {
                matrix,
                method: Some(method),
                k_max,
                n_neighbors,
                threshold,
                embedding,
                paramdiff,
            };
            commands::analyze_cmd(&common.into(), &opts)
        }
        Command::Reconstruct { common, matrix, k, seeds, shuffle } => {
            commands::reconstruct_cmd(&common.into(), &ReconstructOptions { matrix, k, seeds, shuffle })
        }
        Command::Report { common } => commands::report(&common.into()),
        Command::Schema => {
            print!("{}", metasub::config::CONFIG_SCHEMA);
            Ok(())
        }
    }
}
