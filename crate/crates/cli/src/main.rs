//! `partmatch`: synthesize benchmark data, build part descriptors, match maps
//! and evaluate retrieval.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use settings::Settings;

#[derive(Parser, Debug)]
#[command(
    name = "partmatch",
    version,
    about = "Part-based 2D map descriptors and retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic benchmark dataset.
    Synth {
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Discover parts and write one descriptor file per input map.
    Build {
        #[command(flatten)]
        shared: SharedArgs,
        /// Map files, or directories holding `*.map` files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Rank a database against one query.
    Match {
        #[command(flatten)]
        shared: SharedArgs,
        /// Query map (`.map`) or, for imm, a descriptor (`.pslm`).
        #[arg(long)]
        query: PathBuf,
        /// Database files or directories: maps for dmm, descriptors otherwise.
        #[arg(long, required = true, num_args = 1..)]
        db: Vec<PathBuf>,
        /// Directory of original database maps, needed by --rerank.
        #[arg(long)]
        db_maps: Option<PathBuf>,
    },
    /// Run the retrieval battery on a dataset and write ANR reports.
    Eval {
        #[command(flatten)]
        shared: SharedArgs,
        /// Dataset directory as written by `synth`.
        #[arg(long)]
        data: PathBuf,
    },
}

/// Flags every subcommand accepts. Unset flags fall back to the config file,
/// then to defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct SharedArgs {
    /// `key=value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dictionary map.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Parts per stored descriptor [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// dmm, imm or hmm; eval takes a comma list and also `random`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// max-max, sum-max or sum-max-weighted (mm, sm, smw).
    #[arg(long)]
    pub strategy: Option<String>,
    /// Direct-matching re-rank depth; eval takes a comma list [default: 10,20].
    #[arg(long)]
    pub rerank: Option<String>,
    /// Seed for synthesis, discovery, matching and task sampling [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Database size per evaluation task [default: 100].
    #[arg(long)]
    pub db_size: Option<usize>,
    /// Worker threads; 0 uses every core [default: 0].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pairwise-overlap filter on part pools: strict or off [default: off].
    #[arg(long)]
    pub gc: Option<String>,
    /// synth: point noise standard deviation in meters.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// synth: probability that a visible point is observed in a lap.
    #[arg(long)]
    pub keep: Option<f64>,
    /// synth: submap window length in meters of travel.
    #[arg(long)]
    pub window: Option<f64>,
    /// synth: travel between consecutive query submaps in meters.
    #[arg(long)]
    pub stride: Option<f64>,
    /// eval: also measure per-pair matching time.
    #[arg(long)]
    pub timing: bool,
    /// eval: use at most this many tasks.
    #[arg(long)]
    pub max_tasks: Option<usize>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
    /// Outputs were written but some items failed.
    Partial(String),
}

impl From<partmatch::Error> for Failure {
    fn from(e: partmatch::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("PARTMATCH_LOG", "info");
    env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<(), Failure> {
    let shared = match &cli.command {
        Command::Synth { shared }
        | Command::Build { shared, .. }
        | Command::Match { shared, .. }
        | Command::Eval { shared, .. } => shared,
    };
    let settings = Settings::resolve(shared)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build_global()
        .map_err(|e| Failure::Data(e.into()))?;
    match &cli.command {
        Command::Synth { .. } => commands::synth(&settings),
        Command::Build { inputs, .. } => commands::build(&settings, inputs),
        Command::Match {
            query, db, db_maps, ..
        } => commands::match_query(&settings, query, db, db_maps.as_deref()),
        Command::Eval { data, .. } => commands::eval(&settings, data),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            error!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Partial(msg)) => {
            error!("{msg}");
            ExitCode::from(3)
        }
    }
}
