use std::path::PathBuf;

use anyhow::{bail, ensure, Result};
use clap::ValueEnum;
use scdag_core::corpus::{emit_conll, Sentence};
use scdag_core::ensemble::{average_logits, token_vote};
use serde_json::json;

use crate::io::{container_to_logits, read_conll, read_container, read_text, usage, write_text};
use crate::manifest::{beside, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Mean of softmax or span scores, then decode.
    AvgLogits,
    /// Weighted per-token vote over predicted tag sequences.
    Vote,
}

/// Combine several runs into one prediction.
#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    method: Method,
    /// Logit containers written by `predict --logits` (avg-logits).
    #[arg(long, num_args = 1..)]
    logits: Vec<PathBuf>,
    /// CoNLL predictions (vote).
    #[arg(long, num_args = 1..)]
    predictions: Vec<PathBuf>,
    /// One weight per run (vote); defaults to equal weights.
    #[arg(long, num_args = 1.., conflicts_with = "weights_file")]
    weights: Vec<f64>,
    /// Whitespace-separated weights, one per run.
    #[arg(long)]
    weights_file: Option<PathBuf>,
    /// Sentences the logits belong to (avg-logits).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output CoNLL file.
    #[arg(long)]
    out: PathBuf,
}

fn average(args: &Args) -> Result<Vec<Sentence>> {
    ensure!(!args.logits.is_empty(), usage("avg-logits needs at least one --logits file"));
    let input = args.input.as_ref().ok_or_else(|| usage("avg-logits needs --input"))?;
    let sentences = read_conll(input)?;
    let runs = args
        .logits
        .iter()
        .map(|p| container_to_logits(&read_container(p)?))
        .collect::<Result<Vec<_>>>()?;
    for (p, (ids, _)) in args.logits.iter().zip(&runs) {
        if ids.len() != sentences.len() || ids.iter().zip(&sentences).any(|(a, s)| *a != s.id) {
            bail!("{} does not cover the sentences of {}", p.display(), input.display());
        }
    }
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let per_run: Vec<_> = runs.iter().map(|(_, l)| l[i].clone()).collect();
            let tags = average_logits(&per_run)?.decode()?;
            Ok(Sentence::new(s.id.clone(), s.tokens.clone(), tags)?)
        })
        .collect()
}

fn vote(args: &Args, weights: &[f64]) -> Result<Vec<Sentence>> {
    ensure!(!args.predictions.is_empty(), usage("vote needs at least one --predictions file"));
    let runs = args.predictions.iter().map(|p| read_conll(p)).collect::<Result<Vec<_>>>()?;
    let base = &runs[0];
    for (p, r) in args.predictions.iter().zip(&runs) {
        ensure!(
            r.len() == base.len() && r.iter().zip(base).all(|(a, b)| a.tokens == b.tokens),
            "{} is not aligned with {}",
            p.display(),
            args.predictions[0].display()
        );
    }
    let weights = if weights.is_empty() {
        vec![1.0; runs.len()]
    } else {
        weights.to_vec()
    };
    base.iter()
        .enumerate()
        .map(|(i, s)| {
            let tags: Vec<_> = runs.iter().map(|r| r[i].tags.clone()).collect();
            Ok(Sentence::new(s.id.clone(), s.tokens.clone(), token_vote(&tags, &weights)?)?)
        })
        .collect()
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let weights = match &args.weights_file {
        Some(p) => read_text(p)?
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|e| usage(format!("{}: bad weight `{w}`: {e}", p.display()))))
            .collect::<Result<Vec<_>>>()?,
        None => args.weights.clone(),
    };
    let merged = match args.method {
        Method::AvgLogits => average(&args)?,
        Method::Vote => vote(&args, &weights)?,
    };
    write_text(&args.out, &emit_conll(&merged))?;
    let mut inputs: Vec<&std::path::Path> = args.logits.iter().chain(&args.predictions).map(|p| p.as_path()).collect();
    inputs.extend(args.input.as_deref());
    inputs.extend(args.weights_file.as_deref());
    ctx.finish(
        "ensemble",
        json!({ "method": format!("{:?}", args.method), "weights": weights }),
        &inputs,
        None,
        &[&args.out],
        Some(beside(&args.out)),
    )
}
