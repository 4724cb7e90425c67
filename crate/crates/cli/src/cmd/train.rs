use std::path::PathBuf;

use anyhow::Result;
use scdag_core::gazetteer::Gazetteer;
use scdag_core::heads::HeadKind;
use scdag_core::scdag::{train, Variant};

use super::load_config;
use crate::io::{read_conll, read_gazetteer, write_json, write_text};
use crate::manifest::Context;

/// Train a tagger; flags override the config file.
#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSON or TOML config (`.toml` extension selects TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Gazetteer TSV; omitted means an empty gazetteer.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_head)]
    classifier: Option<HeadKind>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs_stage1: Option<usize>,
    #[arg(long)]
    epochs_stage2: Option<usize>,
}

pub fn parse_head(s: &str) -> Result<HeadKind, String> {
    s.parse().map_err(|e: scdag_core::Error| e.to_string())
}

pub fn parse_variant(s: &str) -> Result<Variant, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown variant `{s}`; expected scdag, integration or base"))
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.classifier {
        config.classifier = v;
    }
    if let Some(v) = args.variant {
        config.variant = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = Some(v);
    }
    if let Some(v) = args.epochs_stage1 {
        config.epochs_stage1 = v;
    }
    if let Some(v) = args.epochs_stage2 {
        config.epochs_stage2 = v;
    }
    config.validate()?;

    let train_set = read_conll(&args.train)?;
    let dev_set = match &args.dev {
        Some(p) => read_conll(p)?,
        None => Vec::new(),
    };
    let gazetteer = match &args.gazetteer {
        Some(p) => read_gazetteer(p)?,
        None => Gazetteer::new(),
    };
    let out = train(&config, &train_set, &dev_set, &gazetteer)?;

    let ckpt = args.out.join("model.ckpt");
    let log_path = args.out.join("train_log.jsonl");
    let history_path = args.out.join("history.json");
    let config_path = args.out.join("config.json");
    std::fs::create_dir_all(&args.out)?;
    out.model.save(&ckpt)?;
    let mut log = String::new();
    for step in &out.steps {
        log.push_str(&serde_json::to_string(step)?);
        log.push('\n');
    }
    write_text(&log_path, &log)?;
    write_json(
        &history_path,
        &serde_json::json!({
            "epochs": out.history,
            "best_epoch": out.best_epoch,
            "best_dev_f1": out.best_dev_f1,
            "warnings": out.warnings,
        }),
    )?;
    write_json(&config_path, &config)?;
    if let Some(f1) = out.best_dev_f1 {
        println!("best dev fine macro-F1 {f1:.4} at stage-2 epoch {}", out.best_epoch.unwrap_or(0));
    }

    let mut inputs = vec![args.train.as_path()];
    inputs.extend(args.dev.as_deref());
    inputs.extend(args.gazetteer.as_deref());
    inputs.extend(args.config.as_deref());
    ctx.finish(
        "train",
        serde_json::to_value(&config)?,
        &inputs,
        Some(config.seed),
        &[&ckpt, &log_path, &history_path, &config_path],
        Some(args.out.join("manifest.json")),
    )
}
