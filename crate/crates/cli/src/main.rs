mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Config;

#[derive(Parser)]
#[command(
    name = "bkp",
    version,
    about = "Decode, suppress, associate, score and simulate body/keypoint/part detections"
)]
struct Cli {
    /// TOML or JSON file mirroring every flag.
    #[arg(long, global = true, env = "BKP_CONFIG")]
    config: Option<PathBuf>,
    /// Seed for synthetic data.
    #[arg(long, global = true, env = "BKP_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "BKP_THREADS")]
    threads: Option<usize>,
    /// Turn recoverable problems (unpaired images, failed sweep trends) into errors.
    #[arg(long, global = true, env = "BKP_STRICT")]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub(crate) enum Command {
    /// Decode a raw head tensor dump into detections.
    Decode(DecodeArgs),
    /// Class-aware greedy suppression of a detection file.
    Nms(InOut),
    /// Attach parts to people by nearest keypoint centroid.
    Associate(InOut),
    /// Loss components for matched prediction/target pairs.
    Loss(InOut),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic ground-truth/prediction corpus.
    Synth(SynthArgs),
    /// Join keypoint and part annotations of the same images.
    Merge(MergeArgs),
    /// Association accuracy as the number of people per scene grows.
    Sweep(SweepArgs),
}

#[derive(Args)]
pub(crate) struct InOut {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct DecodeArgs {
    #[command(flatten)]
    io: InOut,
    /// Defaults to the dump's file stem.
    #[arg(long)]
    image_id: Option<String>,
    /// Image size; defaults to the largest grid extent.
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    part_visibility: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum GtFormat {
    Hier,
    Coco,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum PredFormat {
    Hier,
    CocoResults,
}

#[derive(Args)]
pub(crate) struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value = "hier")]
    gt_format: GtFormat,
    #[arg(long, value_enum, default_value = "hier")]
    pred_format: PredFormat,
    /// Report JSON path; defaults to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also print a text table (stdout, or stderr when the report goes to stdout).
    #[arg(long)]
    table: bool,
    #[arg(long)]
    traces: bool,
    /// Evaluate each class only on images whose ground truth contains it.
    #[arg(long)]
    restrict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum NoisePreset {
    None,
    Jitter,
    Moderate,
}

#[derive(Args)]
pub(crate) struct SynthArgs {
    /// Writes `gt.json` and `pred.json` here.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    people_min: Option<usize>,
    #[arg(long)]
    people_max: Option<usize>,
    /// Replaces the configured noise model.
    #[arg(long, value_enum)]
    noise: Option<NoisePreset>,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum KptsFormat {
    Coco,
    Hier,
}

#[derive(Args)]
pub(crate) struct MergeArgs {
    #[arg(long)]
    kpts: PathBuf,
    #[arg(long, value_enum, default_value = "coco")]
    kpts_format: KptsFormat,
    /// Hierarchical file with part labels.
    #[arg(long)]
    parts: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    iou: Option<f64>,
}

#[derive(Args)]
pub(crate) struct SweepArgs {
    #[arg(long)]
    report: Option<PathBuf>,
    /// Scenes per people count.
    #[arg(long, default_value_t = 1000)]
    scenes: usize,
    #[arg(long, default_value_t = 1)]
    people_min: usize,
    #[arg(long, default_value_t = 7)]
    people_max: usize,
    /// Replaces the configured noise model (default: jitter).
    #[arg(long, value_enum)]
    noise: Option<NoisePreset>,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Decode(_) => "decode",
        Command::Nms(_) => "nms",
        Command::Associate(_) => "associate",
        Command::Loss(_) => "loss",
        Command::Eval(_) => "eval",
        Command::Synth(_) => "synth",
        Command::Merge(_) => "merge",
        Command::Sweep(_) => "sweep",
    }
}

fn resolve(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed.or(cfg.seed) {
        cfg.seed = Some(s);
        cfg.synth.seed = s;
    }
    cfg.threads = cli.threads.or(cfg.threads);
    cfg.strict = Some(cli.strict || cfg.strict.unwrap_or(false));
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    eprintln!(
        "bkp {} {} config={} seed={}",
        env!("CARGO_PKG_VERSION"),
        command_name(&cli.command),
        cfg.hash()?,
        cfg.synth.seed
    );
    commands::dispatch(cli.command, cfg)
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    use bkp_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::Invalid { .. }) => "invalid",
        Some(E::Config(_)) => "config",
        Some(E::NonFinite { .. }) => "non_finite",
        Some(E::Parse { .. }) => "parse",
        Some(E::Io(_)) => "io",
        Some(E::Json(_)) => "json",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "runtime",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": {"kind": error_kind(&e), "message": format!("{e:#}")}
            });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
