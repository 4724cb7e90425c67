use std::path::PathBuf;

use anyhow::Result;
use clap::ValueEnum;
use scdag_core::corpus::emit_conll;
use scdag_core::synth::{benchmark_corpus, construction_fixture, dump_to_tsv, overfit_corpus, BenchmarkSpec};
use serde_json::json;

use crate::io::{write_gazetteer, write_text};
use crate::manifest::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Small corpus with a fully covering gazetteer.
    Overfit,
    /// Corpus whose labels often need the gazetteer.
    Benchmark,
    /// Knowledge-base dump and reference corpus for gazetteer construction.
    Construction,
}

/// Write a bundled synthetic fixture.
#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let mut artifacts = Vec::new();
    match args.kind {
        Kind::Overfit | Kind::Benchmark => {
            let c = match args.kind {
                Kind::Overfit => overfit_corpus(args.seed),
                _ => benchmark_corpus(BenchmarkSpec::default(), args.seed),
            };
            let (train, dev, gaz) = (args.out.join("train.conll"), args.out.join("dev.conll"), args.out.join("gazetteer.tsv"));
            write_text(&train, &emit_conll(&c.train))?;
            write_text(&dev, &emit_conll(&c.dev))?;
            write_gazetteer(&gaz, &c.gazetteer)?;
            artifacts.extend([train, dev, gaz]);
        }
        Kind::Construction => {
            let f = construction_fixture(args.seed);
            let (dump, reference) = (args.out.join("dump.tsv"), args.out.join("reference.conll"));
            write_text(&dump, &dump_to_tsv(&f.records))?;
            write_text(&reference, &emit_conll(&f.reference))?;
            artifacts.extend([dump, reference]);
        }
    }
    let artifacts: Vec<&std::path::Path> = artifacts.iter().map(|p| p.as_path()).collect();
    ctx.finish(
        "synth",
        json!({ "kind": format!("{:?}", args.kind) }),
        &[],
        Some(args.seed),
        &artifacts,
        Some(args.out.join("manifest.json")),
    )
}
