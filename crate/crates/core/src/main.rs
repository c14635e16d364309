use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use authentiscope::config::{PipelineConfig, CONFIG_ENV};
use authentiscope::pipeline::Pipeline;
use authentiscope::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "authentiscope", version, about = "Compare authentic and generated replies, and train a detector")]
struct Cli {
    /// Pipeline config (JSON). Falls back to $AUTHENTISCOPE_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Fail on any missing sidecar artifact.
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the dataset and report sidecar coverage.
    Ingest,
    /// Write quantitative, morphosyntactic and semantic feature tables.
    Features,
    /// Write the corpus similarity grid.
    Align {
        /// Compare the original corpus with itself.
        #[arg(long)]
        self_check: bool,
    },
    /// Cluster the embeddings and write assignments.
    Cluster,
    /// Run the detection sweep and save the best model.
    Detect,
    /// Run every stage.
    Report,
}

fn run(cli: Cli) -> Result<()> {
    let path = cli
        .config
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
        .ok_or_else(|| Error::Config(format!("no config given; pass --config or set {CONFIG_ENV}")))?;
    let mut config = PipelineConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.strict |= cli.strict;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let pipeline = Pipeline::new(config, cli.out)?;
    match cli.command {
        Command::Ingest => pipeline.ingest().map(drop),
        Command::Features => pipeline.features().map(drop),
        Command::Align { self_check } => pipeline.align(self_check).map(drop),
        Command::Cluster => pipeline.cluster().map(drop),
        Command::Detect => pipeline.detect().map(drop),
        Command::Report => pipeline.report().map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}
