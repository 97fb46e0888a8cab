//! `rirsf`: simulate rooms, mix talkers, extract features, evaluate and plot.
//!
//! Exit status is 0 on success, 1 for usage errors (bad flags, invalid
//! configuration) and 2 for data errors (missing or malformed inputs,
//! infeasible rooms).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rirsf_core::io::{load_config, LoadedConfig};
use rirsf_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "rirsf",
    version,
    about = "RIR-based spatial features for target-speaker experiments"
)]
struct Cli {
    /// Master seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Experiment configuration (`key = value` with `[section]` headers).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate room impulse responses into `<out>/rirs`.
    Simulate(SimulateArgs),
    /// Mix two synthetic talkers through each simulated room into `<out>/bundles`.
    Mix(MixArgs),
    /// Extract one feature map from a mixture bundle into `<out>/features`.
    Features(FeaturesArgs),
    /// Run the full experiment and write `<out>/report.csv`.
    Eval(EvalArgs),
    /// Summarise the report, room diagnostics and simulated responses.
    Report(ReportArgs),
    /// Render 2-D tensors as PGM heatmaps into `<out>/plots`.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Fixed decay time in seconds instead of the configured bands.
    #[arg(long)]
    rt60: Option<f64>,
    /// Rooms per band; defaults to the configuration.
    #[arg(long)]
    rooms: Option<usize>,
}

#[derive(Debug, Args)]
struct MixArgs {
    /// Mixtures per room; defaults to the configuration.
    #[arg(long)]
    mixtures: Option<usize>,
    /// Sample encoding of the written WAV files.
    #[arg(long, value_enum, default_value_t = WavFormat::Float32)]
    format: WavFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum WavFormat {
    Pcm16,
    Float32,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// Bundle directory written by `mix`.
    #[arg(long, value_name = "DIR")]
    bundle: PathBuf,
    /// `sf`, `rsf` or `rp`.
    #[arg(long, default_value = "rsf")]
    feature: String,
    /// Matched-filter length in frames.
    #[arg(long, conflicts_with = "k_seconds")]
    k: Option<usize>,
    /// Matched-filter length in seconds, rounded to frames.
    #[arg(long)]
    k_seconds: Option<f64>,
    /// Which target response the feature is computed with.
    #[arg(long, default_value = "ideal")]
    scenario: String,
    /// Channel for `rp`.
    #[arg(long, default_value_t = 0)]
    channel: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Also write the first mixture's mask, target LPS and feature maps per room.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report to summarise instead of `<out>/report.csv`.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Tensors to render; defaults to everything under `<out>/features` and `<out>/raw`.
    tensors: Vec<PathBuf>,
}

/// Resolved global options.
pub struct Context {
    pub config: rirsf_core::eval::ExperimentConfig,
    pub out: PathBuf,
}

fn context(cli: &Cli) -> Result<Context, Error> {
    let LoadedConfig {
        mut experiment,
        out_dir,
    } = match &cli.config {
        Some(path) => load_config(path)?,
        None => LoadedConfig {
            experiment: Default::default(),
            out_dir: None,
        },
    };
    if let Some(seed) = cli.seed {
        experiment.seed = seed;
    }
    let out = cli.out.clone().or(out_dir).unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context {
        config: experiment,
        out,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let ctx = context(&cli)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&ctx, a.rt60, a.rooms),
        Command::Mix(a) => commands::mix(
            &ctx,
            a.mixtures,
            match a.format {
                WavFormat::Pcm16 => rirsf_core::io::SampleFormat::Pcm16,
                WavFormat::Float32 => rirsf_core::io::SampleFormat::Float32,
            },
        ),
        Command::Features(a) => {
            let k = match (a.k, a.k_seconds) {
                (Some(k), _) => Some(k),
                (None, Some(s)) if s > 0.0 && s.is_finite() => Some(ctx.config.frame.frames_for_seconds(s)),
                (None, Some(s)) => return Err(Error::Config(format!("--k-seconds {s} must be positive"))),
                (None, None) => None,
            };
            commands::features(&ctx, &a.bundle, &a.feature, k, &a.scenario, a.channel)
        }
        Command::Eval(a) => commands::eval(&ctx, a.raw),
        Command::Report(a) => commands::report(&ctx, a.csv.as_deref()),
        Command::Plot(a) => commands::plot(&ctx, &a.tensors),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rirsf: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
