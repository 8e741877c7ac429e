mod commands;
mod input;
mod output;
mod plot;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eigengeo::EnsembleSpec;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] eigengeo::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric_failure() => 3,
            CliError::Mismatch(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "eigengeo", version, about = "Spectral information geometry of Gaussian covariances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fisher metric, fixed-eigenvalue curvature and statistical curvature at λ.
    Geometry(GeometryArgs),
    /// First-order information loss of the sample eigenvalues.
    InfoLoss(InfoLossArgs),
    /// Eigenvalue estimates from a sample product-sum matrix.
    Estimate(EstimateArgs),
    /// Monte-Carlo experiments.
    Experiment(ExperimentArgs),
    /// Re-run a recorded command and compare its outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// Eigenvalues, descending, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    /// Add finite-difference oracle columns.
    #[arg(long)]
    pub check_fd: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InfoLossArgs {
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    /// Sample size; adds the information carried by the sample eigenvalues.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Lbar,
    GammaFrame,
    Star,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Matrix file: `p` on the first line, then `p` rows of `p` values.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lbar")]
    pub method: Vec<Method>,
    /// `identity` or a matrix file with orthonormal columns.
    #[arg(long, default_value = "identity")]
    pub gamma: String,
    #[arg(long, value_parser = parse_ensemble)]
    pub ensemble: Option<EnsembleSpec>,
    /// Seed for Haar ensembles.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Bias,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    /// Replications per grid point. Defaults depend on the experiment and `--paper-scale`.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Population eigenvalues for `bias` (default: all ones).
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_ensemble)]
    pub ensemble: Option<EnsembleSpec>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Replication counts of the original study; fig3 also switches to the full grid.
    #[arg(long)]
    pub paper_scale: bool,
    /// fig3: all 51 angles instead of every fifth.
    #[arg(long)]
    pub full_grid: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV (requires `--out`).
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the regenerated outputs.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_ensemble(s: &str) -> Result<EnsembleSpec, String> {
    s.parse().map_err(|e: eigengeo::Error| e.to_string())
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("EIGENGEO_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Input(format!("EIGENGEO_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

pub fn run(args: Vec<String>) -> CliResult<()> {
    let cli = Cli::try_parse_from(std::iter::once("eigengeo".to_string()).chain(args.iter().cloned()))
        .map_err(|e| CliError::Input(e.to_string()))?;
    match cli.command {
        Command::Geometry(a) => commands::geometry(&a, &args),
        Command::InfoLoss(a) => commands::info_loss(&a, &args),
        Command::Estimate(a) => commands::estimate(&a, &args),
        Command::Experiment(a) => commands::experiment(&a, &args),
        Command::Replay(a) => commands::replay(&a),
    }
}

fn main() -> ExitCode {
    // let clap handle help, version and usage errors itself
    let cli = Cli::parse();
    drop(cli);
    let args: Vec<String> = std::env::args().skip(1).collect();
    match configure_threads().and_then(|()| run(args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
