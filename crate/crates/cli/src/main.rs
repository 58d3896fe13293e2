use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use satprobe_cli::{run, Command, RunOptions};

/// Attention-based prediction of factual errors in language models.
#[derive(Parser)]
#[command(name = "satprobe", version)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = "satprobe.toml")]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Split seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Build prompts, run the model, and write labeled traces.
    Trace,
    /// Re-run the verifiers over an existing trace file.
    Label,
    /// Train and score every predictor over repeated splits.
    Eval,
    /// Probe quality as a function of the number of layers used.
    SweepLayers,
    /// Outcome grid of a small and a large model over the same prompts.
    Grid,
    /// Accuracy binned by popularity, constrainedness or attention.
    Bin,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SATPROBE_LOG", "info")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let command = match cli.command {
        Sub::Trace => Command::Trace,
        Sub::Label => Command::Label,
        Sub::Eval => Command::Eval,
        Sub::SweepLayers => Command::SweepLayers,
        Sub::Grid => Command::Grid,
        Sub::Bin => Command::Bin,
    };
    let opts = RunOptions { config: cli.config, out: cli.out, seed: cli.seed };
    match run(command, &opts) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
