use std::path::PathBuf;
use std::process::ExitCode;

use abuse_pipeline::run::apply_overrides;
use abuse_pipeline::{execute, parse_config, Command, THREADS_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "abuse-pipeline",
    version,
    about = "Train and diagnose multilingual abusive-comment classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load, clean, transliterate and oversample the train corpus.
    Ingest(Common),
    /// Run every enabled training stage.
    Train(Common),
    /// Train and write test predictions (needs `test_path`).
    Predict(Common),
    /// Train, then probe for label noise.
    Diagnose(Common),
    /// Export a 2-D scatter of the train embeddings.
    Plot(Common),
    /// Write a synthetic corpus.
    Synth(Common),
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV}={raw:?} is not a thread count"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Ingest(c) => (Command::Ingest, c),
        Cmd::Train(c) => (Command::Train, c),
        Cmd::Predict(c) => (Command::Predict, c),
        Cmd::Diagnose(c) => (Command::Diagnose, c),
        Cmd::Plot(c) => (Command::Plot, c),
        Cmd::Synth(c) => (Command::Synth, c),
    };
    if let Err(e) = init_threads() {
        eprintln!("error: stage setup failed: {e}");
        return ExitCode::FAILURE;
    }
    let mut cfg = match parse_config(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: stage config failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    apply_overrides(&mut cfg, common.output_dir, common.seed);
    match execute(command, &cfg) {
        Ok(summary) => {
            for (stage, wall) in &summary.stages {
                eprintln!("{stage}: {wall:.2?}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
