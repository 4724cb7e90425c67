use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::ValueEnum;
use log::info;
use scdag_core::matcher::{build_tree, featurize, features_to_csv, match_sentence, Match};
use serde::Serialize;
use serde_json::json;

use crate::io::{read_conll, read_gazetteer, read_plain, write_json, write_text};
use crate::manifest::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Conll,
    /// One whitespace-tokenised sentence per line.
    Text,
}

/// Match sentences against a gazetteer and emit the multi-hot tag features.
#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    gazetteer: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "conll")]
    format: InputFormat,
    /// Output directory for `matches.json` and `features.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct SentenceMatches<'a> {
    id: &'a str,
    matches: Vec<Match>,
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let g = read_gazetteer(&args.gazetteer)?;
    let sentences = match args.format {
        InputFormat::Conll => read_conll(&args.input)?,
        InputFormat::Text => read_plain(&args.input)?,
    };
    let started = Instant::now();
    let tree = build_tree(&g);
    let mut records = Vec::with_capacity(sentences.len());
    let mut csv = Vec::with_capacity(sentences.len());
    let mut tokens = 0;
    for s in &sentences {
        let matches = match_sentence(&tree, &s.tokens);
        csv.push(features_to_csv(&s.tokens, &featurize(&matches, s.len())));
        records.push(SentenceMatches { id: &s.id, matches });
        tokens += s.len();
    }
    let secs = started.elapsed().as_secs_f64();
    info!(
        "matched {tokens} tokens in {secs:.3}s ({:.0} tokens/s)",
        tokens as f64 / secs.max(1e-9)
    );
    let matches_path = args.out.join("matches.json");
    let csv_path = args.out.join("features.csv");
    write_json(&matches_path, &records)?;
    write_text(&csv_path, &csv.join("\n"))?;
    ctx.finish(
        "match",
        json!({ "format": format!("{:?}", args.format) }),
        &[&args.gazetteer, &args.input],
        None,
        &[&matches_path, &csv_path],
        Some(args.out.join("manifest.json")),
    )
}
