//! `yieldcast` command-line pipeline: ingest, preprocess, train, ensemble,
//! evaluate, importance and genotype selection over one run directory.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Run;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "yieldcast", version, about = "Crop yield prediction pipeline")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "yieldcast.toml", env = "YIELDCAST_CONFIG")]
    config: PathBuf,
    /// Base seed for every stochastic stage; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for all artifacts; overrides the config value.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Treat every validation violation as fatal.
    #[arg(long, global = true, default_value_t = false)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load records and weather, validate and join them into dataset.json.
    Ingest,
    /// Encode, split and normalize the joined dataset into features.ycfm.
    Preprocess,
    /// Train one model on the training split.
    Train {
        /// Model to train: cnn-dnn, cnn-lstm-dnn or lasso.
        #[arg(long, default_value = "cnn-dnn", value_parser = ["cnn-dnn", "cnn-lstm-dnn", "lasso"])]
        arch: String,
    },
    /// Fit ensemble weights on the validation split.
    Ensemble,
    /// Score every trained model and the ensemble; write metrics and region errors.
    Evaluate,
    /// Permutation importance of feature groups and weather periods on the test split.
    Importance,
    /// Rank genotypes by predicted yield at every observed location-year.
    SelectGenotypes {
        /// Genotypes kept per location-year.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Scoring model (cnn-dnn, cnn-lstm-dnn, lasso or gem); defaults to the config's [selection] model.
        #[arg(long)]
        model: Option<String>,
    },
    /// Generate a synthetic records.csv / weather.csv pair from the config's [synth] section.
    Synth,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = std::env::var("YIELDCAST_THREADS").ok().filter(|s| !s.is_empty()) {
        let n: usize = n.parse().context("YIELDCAST_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    let mut config = RunConfig::load(&cli.config)?;
    config.strict |= cli.strict;
    let run = Run {
        seed: cli.seed.unwrap_or(config.seed),
        out: cli.out.unwrap_or_else(|| config.out_dir.clone()),
        config,
    };
    log::debug!("run directory {}, seed {}", run.out.display(), run.seed);
    match cli.command {
        Command::Ingest => commands::ingest(&run),
        Command::Preprocess => commands::preprocess(&run),
        Command::Train { arch } => commands::train_model(&run, &arch),
        Command::Ensemble => commands::ensemble(&run),
        Command::Evaluate => commands::evaluate(&run),
        Command::Importance => commands::importance(&run),
        Command::SelectGenotypes { k, model } => commands::select_genotypes(&run, k, model.as_deref()),
        Command::Synth => commands::synth(&run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
