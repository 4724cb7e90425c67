use std::path::PathBuf;

use anyhow::Result;
use log::info;
use rayon::prelude::*;
use scdag_core::corpus::{emit_conll, Sentence};
use scdag_core::ensemble::{average_logits, kfold_split, token_vote};
use scdag_core::gazetteer::Gazetteer;
use scdag_core::heads::HeadKind;
use scdag_core::metrics::evaluate;
use scdag_core::scdag::{predict, train};
use serde_json::json;

use super::{build_pool, load_config};
use crate::io::{read_conll, read_gazetteer, write_json, write_text};
use crate::manifest::Context;

/// Train one model per fold and ensemble them on an optional test set.
#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Seed of the fold split; the model seed comes from the config.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Held-out CoNLL set scored by every fold and by the ensemble.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let sentences = read_conll(&args.train)?;
    let g = match &args.gazetteer {
        Some(p) => read_gazetteer(p)?,
        None => Gazetteer::new(),
    };
    let test = args.test.as_deref().map(read_conll).transpose()?;
    let plan = kfold_split(sentences.len(), args.k, args.seed)?;
    let pick = |idx: &[usize]| -> Vec<Sentence> { idx.iter().map(|&i| sentences[i].clone()).collect() };

    let outputs = build_pool(args.threads)?.install(|| {
        plan.folds
            .par_iter()
            .map(|f| train(&config, &pick(&f.train), &pick(&f.validation), &g))
            .collect::<scdag_core::Result<Vec<_>>>()
    })?;

    let mut artifacts = Vec::new();
    let mut fold_f1 = Vec::new();
    let mut test_f1 = Vec::new();
    let mut test_runs = Vec::new();
    for (i, out) in outputs.iter().enumerate() {
        let dir = args.out.join(format!("fold_{i}"));
        std::fs::create_dir_all(&dir)?;
        let ckpt = dir.join("model.ckpt");
        out.model.save(&ckpt)?;
        artifacts.push(ckpt);
        fold_f1.push(out.best_dev_f1.unwrap_or(0.0));
        if let Some(test) = &test {
            let p = predict(&out.model, test, &g)?;
            let tagged = p.tagged(test)?;
            test_f1.push(evaluate(&tagged, test)?.fine_macro.f1);
            test_runs.push(p);
        }
        info!("fold {i}: dev F1 {:.4}", fold_f1[i]);
    }

    let mut summary = json!({
        "k": args.k,
        "split_seed": args.seed,
        "plan": plan,
        "fold_dev_f1": fold_f1,
        "mean_dev_f1": fold_f1.iter().sum::<f64>() / fold_f1.len() as f64,
    });
    if let Some(test) = &test {
        let merged = test
            .iter()
            .enumerate()
            .map(|(s, sent)| {
                let tags = if config.classifier == HeadKind::Crf {
                    let runs: Vec<_> = test_runs.iter().map(|r| r.predictions[s].tags.clone()).collect();
                    token_vote(&runs, &vec![1.0; runs.len()])?
                } else {
                    let runs: Vec<_> = test_runs.iter().map(|r| r.predictions[s].logits.clone()).collect();
                    average_logits(&runs)?.decode()?
                };
                Ok(Sentence::new(sent.id.clone(), sent.tokens.clone(), tags)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let report = evaluate(&merged, test)?;
        println!(
            "ensemble test fine macro-F1 {:.4}; fold mean {:.4}",
            report.fine_macro.f1,
            test_f1.iter().sum::<f64>() / test_f1.len() as f64
        );
        let pred_path = args.out.join("ensemble.conll");
        write_text(&pred_path, &emit_conll(&merged))?;
        artifacts.push(pred_path);
        summary["fold_test_f1"] = json!(test_f1);
        summary["ensemble_test"] = serde_json::to_value(&report)?;
    }
    let summary_path = args.out.join("summary.json");
    write_json(&summary_path, &summary)?;
    artifacts.push(summary_path);

    let mut inputs = vec![args.train.as_path()];
    inputs.extend(args.gazetteer.as_deref());
    inputs.extend(args.config.as_deref());
    inputs.extend(args.test.as_deref());
    let artifacts: Vec<&std::path::Path> = artifacts.iter().map(|p| p.as_path()).collect();
    ctx.finish(
        "kfold",
        json!({ "config": config, "k": args.k, "threads": args.threads }),
        &inputs,
        Some(args.seed),
        &artifacts,
        Some(args.out.join("manifest.json")),
    )
}
