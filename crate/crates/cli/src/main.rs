//! Command-line driver for the snapshot pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use snapflow::pipeline::{exit_code, PipelineConfig, Stage, Workspace};
use snapflow::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "snapflow", version, about = "Snapshot order-flow feature, model and backtest pipeline")]
struct Cli {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the configured work directory.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// Rerun every upstream stage before this one.
    #[arg(long, global = true)]
    from_raw: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the raw snapshot file into sessions.
    Ingest,
    /// Generate a synthetic feed in place of a raw file.
    Synth,
    /// Per-frame deltas and open/close decomposition.
    Preprocess,
    /// Technical and microstructure features.
    Features,
    /// Smoothed-return direction labels.
    Label,
    /// Join features and labels into the training matrix.
    Dataset,
    /// Holdout and purged walk-forward folds.
    Split,
    /// Fit one model per fold.
    Train,
    /// Score holdout rows with every fold model.
    Predict,
    /// Trimmed-mean ensemble of fold probabilities.
    Ensemble,
    /// Run the threshold strategy over ensemble probabilities.
    Backtest,
    /// Text and SVG summary of the run.
    Report,
    /// Every stage in order.
    Run,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.work_dir {
        cfg.work_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let stage = match cli.command {
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Run => {
            Workspace::new(cfg)?.run_all()?;
            return Ok(());
        }
        Command::Synth => {
            cfg.raw_path = None;
            Stage::Ingest
        }
        Command::Ingest => Stage::Ingest,
        Command::Preprocess => Stage::Preprocess,
        Command::Features => Stage::Features,
        Command::Label => Stage::Label,
        Command::Dataset => Stage::Dataset,
        Command::Split => Stage::Split,
        Command::Train => Stage::Train,
        Command::Predict => Stage::Predict,
        Command::Ensemble => Stage::Ensemble,
        Command::Backtest => Stage::Backtest,
        Command::Report => Stage::Report,
    };
    let ws = Workspace::new(cfg)?;
    let manifest = ws.run(stage, cli.from_raw)?;
    for (name, digest) in &manifest.outputs {
        println!("{digest}  {}", ws.path(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
