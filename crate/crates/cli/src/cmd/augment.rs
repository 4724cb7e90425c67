use std::path::PathBuf;

use anyhow::{bail, Result};
use log::warn;
use scdag_core::augment::{entity_replace_augment, slot_templates};
use scdag_core::corpus::emit_conll;
use serde_json::json;

use crate::io::{read_conll, read_gazetteer, write_text};
use crate::manifest::{beside, Context};

/// Entity replacement (--input) or template slotting (--templates).
#[derive(Debug, clap::Args)]
pub struct Args {
    /// Labelled CoNLL corpus whose entities get replaced.
    #[arg(long, conflicts_with = "templates")]
    input: Option<PathBuf>,
    /// CoNLL templates with `[Label]` slot tokens.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    gazetteer: PathBuf,
    /// Replacement probability per entity.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let g = read_gazetteer(&args.gazetteer)?;
    let (source, out) = match (&args.input, &args.templates) {
        (Some(p), None) => (p, entity_replace_augment(&read_conll(p)?, &g, args.rate, args.seed)?),
        (None, Some(p)) => (p, slot_templates(&read_conll(p)?, &g, args.seed)),
        _ => bail!(crate::io::usage("give exactly one of --input or --templates")),
    };
    if out.warnings > 0 {
        warn!("{} items left unchanged for lack of gazetteer entries", out.warnings);
    }
    write_text(&args.out, &emit_conll(&out.sentences))?;
    ctx.finish(
        "augment",
        json!({ "rate": args.rate, "templates": args.templates.is_some(), "warnings": out.warnings }),
        &[source, &args.gazetteer],
        Some(args.seed),
        &[&args.out],
        Some(beside(&args.out)),
    )
}
