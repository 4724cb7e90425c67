use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::ValueEnum;
use scdag_core::corpus::Sentence;
use scdag_core::gazetteer::{
    build_one_to_one, build_statistical, coverage_rate, load_dump, load_mapping, normalize_surface, type_label_coverage, CoverageReport,
    Gazetteer,
};
use scdag_core::taxonomy::FineLabel;
use serde_json::json;

use crate::io::{read_conll, write_gazetteer, write_json};
use crate::manifest::{beside, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Keep the top-k labels of every source type by coverage.
    Statistical,
    /// One label per source type, from --mapping or the argmax of coverage.
    OneToOne,
}

/// Build a gazetteer from a knowledge-base dump and a labelled corpus.
#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dump of `surface<TAB>source_type` lines.
    #[arg(long)]
    dump: PathBuf,
    /// Labelled CoNLL corpus used to measure coverage.
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_enum, default_value = "statistical")]
    mode: Mode,
    /// Labels kept per source type in statistical mode.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// `source_type<TAB>label` file for one-to-one mode.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Output gazetteer TSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write the coverage report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn render_table(g: &Gazetteer, baseline: Option<&Gazetteer>, reference: &[Sentence]) -> String {
    let mut totals: BTreeMap<FineLabel, usize> = BTreeMap::new();
    for s in reference {
        for e in s.entities() {
            *totals.entry(e.label).or_default() += 1;
        }
    }
    let rate = |g: &Gazetteer, label: FineLabel| {
        let (mut hit, mut n) = (0, 0);
        for s in reference {
            for e in s.entities().into_iter().filter(|e| e.label == label) {
                n += 1;
                hit += usize::from(g.contains(label, &normalize_surface(s.surface(&e))));
            }
        }
        100.0 * hit as f64 / n.max(1) as f64
    };
    let mut out = String::new();
    let _ = write!(out, "{:<20}{:>12}{:>12}", "Label", "Total Num.", "Coverage");
    if baseline.is_some() {
        let _ = write!(out, "{:>12}", "Argmax");
    }
    out.push('\n');
    for (&label, &n) in &totals {
        let _ = write!(out, "{:<20}{:>12}{:>11.2}%", label.name(), n, rate(g, label));
        if let Some(b) = baseline {
            let _ = write!(out, "{:>11.2}%", rate(b, label));
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<20}{:>12}{:>11.2}%", "Overall", totals.values().sum::<usize>(), 100.0 * coverage_rate(g, reference).label_match);
    if let Some(b) = baseline {
        let _ = write!(out, "{:>11.2}%", 100.0 * coverage_rate(b, reference).label_match);
    }
    out.push('\n');
    out
}

pub fn run(args: Args, ctx: Context) -> Result<()> {
    let f = File::open(&args.dump).with_context(|| format!("cannot read {}", args.dump.display()))?;
    let records = load_dump(BufReader::new(f)).with_context(|| format!("in {}", args.dump.display()))?;
    if records.is_empty() {
        bail!("dump {} has no records", args.dump.display());
    }
    let reference = read_conll(&args.train)?;
    let argmax = || build_one_to_one(&records, &type_label_coverage(&records, &reference).argmax_mapping());
    let (g, baseline) = match args.mode {
        Mode::Statistical => (build_statistical(&records, &reference, args.k)?, Some(argmax()?)),
        Mode::OneToOne => match &args.mapping {
            Some(p) => {
                let f = File::open(p).with_context(|| format!("cannot read {}", p.display()))?;
                let mapping = load_mapping(BufReader::new(f)).with_context(|| format!("in {}", p.display()))?;
                (build_one_to_one(&records, &mapping)?, None)
            }
            None => (argmax()?, None),
        },
    };
    print!("{}", render_table(&g, baseline.as_ref(), &reference));
    write_gazetteer(&args.out, &g)?;
    let mut artifacts = vec![args.out.as_path()];
    if let Some(p) = &args.report {
        write_json(p, &CoverageReport::new(&g, &records, &reference))?;
        artifacts.push(p);
    }
    let mut inputs = vec![args.dump.as_path(), args.train.as_path()];
    if let Some(p) = &args.mapping {
        inputs.push(p);
    }
    ctx.finish(
        "build-gazetteer",
        json!({ "mode": format!("{:?}", args.mode), "k": args.k }),
        &inputs,
        None,
        &artifacts,
        Some(beside(&args.out)),
    )
}
