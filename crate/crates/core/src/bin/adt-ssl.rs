use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adt_ssl::cli;

#[derive(Parser)]
#[command(name = "adt-ssl", version, about = "Adaptive dual-threshold semi-supervised training")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write metrics, thresholds and a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides trainer.seed and split.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint. DATA is `embedded`, `csv:PATH`,
    /// `idx:IMAGES,LABELS`, or a config path (its validation split).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "embedded")]
        data: String,
    },
    /// Run the configured ablation grid and write ablation.csv.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let code = match Args::parse().command {
        Command::Train { config, out, seed } => cli::cmd_train(&config, &out, seed),
        Command::Eval { checkpoint, data } => cli::cmd_eval(&checkpoint, &data),
        Command::Ablate { config, out, threads } => {
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            cli::cmd_ablate(&config, &out, threads)
        }
    };
    ExitCode::from(code as u8)
}
