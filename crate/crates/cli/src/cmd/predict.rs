use std::path::PathBuf;

use anyhow::Result;
use log::info;
use rayon::prelude::*;
use scdag_core::corpus::{emit_conll, Sentence};
use scdag_core::gazetteer::Gazetteer;
use scdag_core::scdag::{predict, Model, PredictOutput};
use serde_json::json;

use super::build_pool;
use crate::io::{logits_to_container, read_conll, read_gazetteer, write_text};
use crate::manifest::{beside, Context};

/// Tag a CoNLL file with a trained model (gold tags in the input are ignored).
#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Output CoNLL file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the pre-decode scores to this container file.
    #[arg(long)]
    logits: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

/// Predict in order-preserving chunks across `threads` workers.
pub fn predict_parallel(model: &Model, sentences: &[Sentence], g: &Gazetteer, threads: usize) -> Result<PredictOutput> {
    if threads <= 1 {
        return Ok(predict(model, sentences, g)?);
    }
    let chunk = sentences.len().div_ceil(threads).max(1);
    let parts: Vec<_> = build_pool(threads)?.install(|| {
        sentences
            .par_chunks(chunk)
            .map(|c| predict(model, c, g))
            .collect::<scdag_core::Result<Vec<_>>>()
    })?;
    let mut out = PredictOutput {
        predictions: Vec::with_capacity(sentences.len()),
        unknown: 0,
    };
    for p in parts {
        out.predictions.extend(p.predictions);
        out.unknown += p.unknown;
    }
    Ok(out)
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let model = Model::load(&args.model)?;
    let sentences = read_conll(&args.input)?;
    let g = match &args.gazetteer {
        Some(p) => read_gazetteer(p)?,
        None => Gazetteer::new(),
    };
    let out = predict_parallel(&model, &sentences, &g, args.threads)?;
    info!("{} subwords mapped to the unknown token", out.unknown);
    write_text(&args.out, &emit_conll(&out.tagged(&sentences)?))?;
    let mut artifacts = vec![args.out.as_path()];
    if let Some(p) = &args.logits {
        let ids: Vec<String> = sentences.iter().map(|s| s.id.clone()).collect();
        let logits: Vec<_> = out.predictions.iter().map(|p| p.logits.clone()).collect();
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        logits_to_container(&ids, &logits)?.save(p)?;
        artifacts.push(p);
    }
    let mut inputs = vec![args.model.as_path(), args.input.as_path()];
    inputs.extend(args.gazetteer.as_deref());
    ctx.finish(
        "predict",
        json!({ "threads": args.threads, "unknown_subwords": out.unknown }),
        &inputs,
        Some(model.config().seed),
        &artifacts,
        Some(beside(&args.out)),
    )
}
