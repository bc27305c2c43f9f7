use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use storyteller::{cmd_evaluate, cmd_generate, cmd_serve_ratings, cmd_synth_data, cmd_train_with, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "storyteller", version, about = "Visual storytelling: train, generate, evaluate, rate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the training split and write a checkpoint and loss log.
    Train,
    /// Generate stories for the evaluation split.
    Generate,
    /// Score candidates against the evaluation split.
    Evaluate,
    /// Write a synthetic dataset.
    SynthData,
    /// Serve the blind human-rating UI and API.
    ServeRatings,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(cli.seed, cli.out);
    match cli.command {
        Command::Train => {
            let total = cfg.train.epochs;
            let s = cmd_train_with(&cfg, |e| {
                eprintln!(
                    "epoch {}/{total} loss {:.6} grad_norm {:.4} rejected {}",
                    e.epoch, e.mean_loss, e.mean_grad_norm, e.rejected_steps
                )
            })?;
            println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
        }
        Command::Generate => {
            let s = cmd_generate(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
        }
        Command::Evaluate => print!("{}", cmd_evaluate(&cfg)?.render_table()),
        Command::SynthData => {
            let (stories, embeddings) = cmd_synth_data(&cfg)?;
            println!("{}\n{}", stories.display(), embeddings.display());
        }
        Command::ServeRatings => cmd_serve_ratings(&cfg)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
