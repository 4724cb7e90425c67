use std::path::PathBuf;

use anyhow::Result;
use scdag_core::metrics::{evaluate_with, MacroAverage};
use serde_json::json;

use crate::io::{read_conll, write_json};
use crate::manifest::Context;

/// Exact-span fine and coarse metrics of predictions against gold.
#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Macro-average over every class instead of only the present ones.
    #[arg(long)]
    all_classes: bool,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let average = if args.all_classes {
        MacroAverage::AllClasses
    } else {
        MacroAverage::PresentClasses
    };
    let report = evaluate_with(&read_conll(&args.pred)?, &read_conll(&args.gold)?, average)?;
    print!("{}", report.to_table());
    let mut artifacts = Vec::new();
    if let Some(p) = &args.out {
        write_json(p, &report)?;
        artifacts.push(p.as_path());
    }
    ctx.finish(
        "evaluate",
        json!({ "average": average }),
        &[&args.pred, &args.gold],
        None,
        &artifacts,
        args.out.as_deref().map(crate::manifest::beside),
    )
}
