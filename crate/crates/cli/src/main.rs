use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd;
mod io;
mod manifest;

/// Gazetteer-enhanced fine-grained NER: gazetteer construction, matching,
/// training, inference, ensembling and evaluation.
#[derive(Debug, Parser)]
#[command(name = "scdag", version)]
struct Cli {
    /// Log filter, e.g. `info` or `scdag_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,

    /// Where to write the run manifest (defaults next to the main output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    BuildGazetteer(cmd::gazetteer::Args),
    Match(cmd::matching::Args),
    Train(cmd::train::Args),
    Predict(cmd::predict::Args),
    Ensemble(cmd::ensemble::Args),
    Evaluate(cmd::evaluate::Args),
    Augment(cmd::augment::Args),
    Kfold(cmd::kfold::Args),
    Synth(cmd::synth::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let ctx = manifest::Context::new(cli.manifest.clone());
    let result = match cli.command {
        Command::BuildGazetteer(a) => cmd::gazetteer::run(a, ctx),
        Command::Match(a) => cmd::matching::run(a, ctx),
        Command::Train(a) => cmd::train::run(a, ctx),
        Command::Predict(a) => cmd::predict::run(a, ctx),
        Command::Ensemble(a) => cmd::ensemble::run(a, ctx),
        Command::Evaluate(a) => cmd::evaluate::run(a, ctx),
        Command::Augment(a) => cmd::augment::run(a, ctx),
        Command::Kfold(a) => cmd::kfold::run(a, ctx),
        Command::Synth(a) => cmd::synth::run(a, ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(io::exit_code(&e))
        }
    }
}
