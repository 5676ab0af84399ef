use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::FileConfig;

pub const WORKERS_ENV: &str = "FUNDUS_PREP_WORKERS";

/// Fundus image preprocessing and downscaler evaluation.
#[derive(Debug, Parser)]
#[command(name = "fundus-prep", version)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for batch commands [default: $FUNDUS_PREP_WORKERS, else all cores]
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ResampleArgs {
    /// Downscale factor.
    #[arg(long)]
    pub scale: Option<u32>,
    /// Lanczos window taps (4, 6 or 8).
    #[arg(long)]
    pub lanczos_taps: Option<u32>,
    #[arg(long)]
    pub rdip_lambda: Option<f64>,
    #[arg(long)]
    pub rdip_epsilon: Option<f64>,
    /// Plain interpolation: do not widen kernels by the scale factor.
    #[arg(long)]
    pub no_antialias: bool,
    /// Directory of externally produced downscales named `<id>.png`.
    #[arg(long)]
    pub external_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Crop, downscale, pad (and optionally tile) every manifest image.
    Preprocess(PreprocessArgs),
    /// Score downscalers by downscale, Lanczos upscale and PSNR/SSIM.
    Roundtrip(RoundtripArgs),
    /// Amalgamate manifests and assign stratified train/val/test splits.
    Split(SplitArgs),
    /// Cut images into four quadrant tiles.
    Tile(TileArgs),
    /// Binary DR metrics from a predictions CSV (id,actual,predicted).
    Metrics(MetricsArgs),
    /// PSNR between two images.
    Psnr(PsnrArgs),
    /// Mean SSIM between two images.
    Ssim(SsimArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Manifest or label CSV.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Source tag for every record (kaggle or idrid); otherwise read from the CSV.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Downscaling algorithm: nearest, bilinear, bicubic, lanczos, rdip or external.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Rows/columns with a mean below this level are cropped.
    #[arg(long)]
    pub crop_threshold: Option<f64>,
    #[arg(long)]
    pub target_width: Option<usize>,
    #[arg(long)]
    pub target_height: Option<usize>,
    #[arg(long)]
    pub pad_fill: Option<u8>,
    /// Center-crop downscaled images larger than the target instead of failing them.
    #[arg(long)]
    pub center_crop: bool,
    /// Also write `_tl`, `_tr`, `_bl`, `_br` quadrant tiles.
    #[arg(long)]
    pub tile: bool,
    #[command(flatten)]
    pub resample: ResampleArgs,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated algorithms; `lanczos6`/`lanczos8` select other windows.
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<String>>,
    /// Taps of the common Lanczos upscaler.
    #[arg(long)]
    pub upscale_taps: Option<u32>,
    #[arg(long)]
    pub ssim_window: Option<usize>,
    #[arg(long)]
    pub ssim_stride: Option<usize>,
    /// SSIM dynamic range L.
    #[arg(long)]
    pub ssim_dynamic_range: Option<f64>,
    #[arg(long)]
    pub psnr_peak: Option<f64>,
    #[command(flatten)]
    pub resample: ResampleArgs,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// `SOURCE=PATH` label CSVs to amalgamate, e.g. `kaggle=trainLabels.csv`.
    #[arg(long = "input")]
    pub inputs: Vec<String>,
    /// Output manifest CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub test_frac: Option<f64>,
    #[arg(long)]
    pub val_frac: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TileArgs {
    /// Images with even width and height.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Directory for metrics.json and metrics.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the full JSON report instead of the summary row.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PsnrArgs {
    pub reference: PathBuf,
    pub test: PathBuf,
    #[arg(long)]
    pub peak: Option<f64>,
    /// Directory for the resolved config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SsimArgs {
    pub reference: PathBuf,
    pub test: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub dynamic_range: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a command ended when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Partial,
}

fn resolve_workers(flag: Option<usize>, file: Option<usize>) -> Result<usize> {
    let env = match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .with_context(|| format!("{WORKERS_ENV}={v:?} is not a worker count"))?,
        ),
        _ => None,
    };
    let n = flag
        .or(file)
        .or(env)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        bail!("worker count must be at least 1");
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<Status> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let workers = resolve_workers(cli.workers, file.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting worker pool")?;
    log::info!("using {workers} worker(s)");
    pool.install(|| match cli.command {
        Command::Preprocess(a) => commands::preprocess(a, &file.preprocess, workers),
        Command::Roundtrip(a) => commands::roundtrip(a, &file.roundtrip, workers),
        Command::Split(a) => commands::split(a, &file.split, workers),
        Command::Tile(a) => commands::tile(a, &file.tile, workers),
        Command::Metrics(a) => commands::metrics(a, &file.metrics, workers),
        Command::Psnr(a) => commands::psnr(a, &file.psnr, workers),
        Command::Ssim(a) => commands::ssim(a, &file.ssim, workers),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
