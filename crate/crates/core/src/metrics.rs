//! Exact-span entity metrics at the fine and coarse level.
//!
//! An entity counts as recalled only when start, end and label all match.
//! Macro scores are unweighted means of per-class P, R and F1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Entity, Sentence};
use crate::error::{Error, Result};
use crate::taxonomy::{CoarseLabel, FineLabel, NUM_COARSE, NUM_FINE};

/// Which classes enter the macro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroAverage {
    /// Skip classes with no gold and no predicted entities.
    #[default]
    PresentClasses,
    /// Average over every class of the taxonomy.
    AllClasses,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(recalled: usize, pred: usize, truth: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(recalled, pred);
        let recall = ratio(recalled, truth);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: String,
    #[serde(flatten)]
    pub scores: Prf,
    #[serde(rename = "TRUE")]
    pub truth: usize,
    #[serde(rename = "PRED")]
    pub pred: usize,
    #[serde(rename = "RECALLED")]
    pub recalled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fine: Vec<ClassScores>,
    pub coarse: Vec<ClassScores>,
    pub fine_macro: Prf,
    pub coarse_macro: Prf,
    #[serde(rename = "TRUE")]
    pub truth: usize,
    #[serde(rename = "PRED")]
    pub pred: usize,
    #[serde(rename = "RECALLED")]
    pub recalled: usize,
    pub average: MacroAverage,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    truth: usize,
    pred: usize,
    recalled: usize,
}

fn macro_of(classes: &[ClassScores], average: MacroAverage) -> Prf {
    let used: Vec<&ClassScores> = classes
        .iter()
        .filter(|c| average == MacroAverage::AllClasses || c.truth + c.pred > 0)
        .collect();
    if used.is_empty() {
        return Prf::default();
    }
    let n = used.len() as f64;
    Prf {
        precision: used.iter().map(|c| c.scores.precision).sum::<f64>() / n,
        recall: used.iter().map(|c| c.scores.recall).sum::<f64>() / n,
        f1: used.iter().map(|c| c.scores.f1).sum::<f64>() / n,
    }
}

fn tally<const K: usize>(
    pred: &[Sentence],
    gold: &[Sentence],
    class_of: impl Fn(FineLabel) -> usize,
) -> [Counts; K] {
    let mut counts = [Counts::default(); K];
    for (p, g) in pred.iter().zip(gold) {
        let key = |e: &Entity| (e.start, e.end, class_of(e.label));
        let mut gold_set: Vec<_> = g.entities().iter().map(key).collect();
        let pred_set: Vec<_> = p.entities().iter().map(key).collect();
        for &(_, _, c) in &gold_set {
            counts[c].truth += 1;
        }
        for k in &pred_set {
            counts[k.2].pred += 1;
            // entities within a sentence are disjoint, so each gold span matches at most once
            if let Some(pos) = gold_set.iter().position(|g| g == k) {
                gold_set.swap_remove(pos);
                counts[k.2].recalled += 1;
            }
        }
    }
    counts
}

fn scores(counts: &[Counts], names: impl Fn(usize) -> String) -> Vec<ClassScores> {
    counts
        .iter()
        .enumerate()
        .map(|(i, c)| ClassScores {
            label: names(i),
            scores: Prf::from_counts(c.recalled, c.pred, c.truth),
            truth: c.truth,
            pred: c.pred,
            recalled: c.recalled,
        })
        .collect()
}

pub fn evaluate(pred: &[Sentence], gold: &[Sentence]) -> Result<MetricsReport> {
    evaluate_with(pred, gold, MacroAverage::default())
}

pub fn evaluate_with(pred: &[Sentence], gold: &[Sentence], average: MacroAverage) -> Result<MetricsReport> {
    if pred.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predicted sentences but {} gold",
            pred.len(),
            gold.len()
        )));
    }
    for (p, g) in pred.iter().zip(gold) {
        if p.len() != g.len() {
            return Err(Error::InvalidArgument(format!(
                "sentence {}: {} predicted tags but {} gold tokens",
                g.id,
                p.len(),
                g.len()
            )));
        }
    }
    let fine_counts = tally::<NUM_FINE>(pred, gold, |l| l.0);
    let coarse_counts = tally::<NUM_COARSE>(pred, gold, |l| l.coarse().0);
    let fine = scores(&fine_counts, |i| FineLabel(i).name().to_string());
    let coarse = scores(&coarse_counts, |i| CoarseLabel(i).name().to_string());
    let fine_macro = macro_of(&fine, average);
    let coarse_macro = macro_of(&coarse, average);
    let total = |f: fn(&Counts) -> usize| fine_counts.iter().map(f).sum();
    Ok(MetricsReport {
        fine,
        coarse,
        fine_macro,
        coarse_macro,
        truth: total(|c| c.truth),
        pred: total(|c| c.pred),
        recalled: total(|c| c.recalled),
        average,
    })
}

impl MetricsReport {
    pub fn fine_class(&self, label: FineLabel) -> &ClassScores {
        &self.fine[label.0]
    }

    /// Fixed-width text table with the competition row names.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let mut row = |name: &str, value: String| {
            let _ = writeln!(out, "{name:<28}{value:>12}");
        };
        row("f-macro@F1", format!("{:.4}", self.fine_macro.f1));
        row("f-macro@P", format!("{:.4}", self.fine_macro.precision));
        row("f-macro@R", format!("{:.4}", self.fine_macro.recall));
        row("c-macro@F1", format!("{:.4}", self.coarse_macro.f1));
        row("c-macro@P", format!("{:.4}", self.coarse_macro.precision));
        row("c-macro@R", format!("{:.4}", self.coarse_macro.recall));
        row("TRUE", self.truth.to_string());
        row("PRED", self.pred.to_string());
        row("RECALLED", self.recalled.to_string());
        for c in self.coarse.iter().filter(|c| c.truth + c.pred > 0) {
            row(&format!("F1@{}", c.label), format!("{:.4}", c.scores.f1));
        }
        for c in self.fine.iter().filter(|c| c.truth + c.pred > 0) {
            row(&format!("F1@{}", c.label), format!("{:.4}", c.scores.f1));
        }
        out
    }
}
