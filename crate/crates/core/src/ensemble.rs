//! K-fold planning and ensembling: logit averaging and weighted token voting.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{entities_to_tags, repair_bio};
use crate::error::{shape_err, Error, Result};
use crate::heads::{softmax_decode, span_decode, HeadKind};
use crate::taxonomy::Tag;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Shuffle `0..n` with `seed` and cut it into `k` validation folds whose
/// sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}; need at least 2 folds")));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("cannot split {n} items into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut validation = order[cursor..cursor + size].to_vec();
        validation.sort_unstable();
        let mut train: Vec<usize> = order[..cursor].iter().chain(&order[cursor + size..]).copied().collect();
        train.sort_unstable();
        folds.push(Fold { train, validation });
        cursor += size;
    }
    Ok(FoldPlan { seed, folds })
}

/// Pre-decode scores of one sentence, word-aligned.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadLogits {
    Softmax(Array2<f64>),
    Span { start: Array2<f64>, end: Array2<f64> },
    /// CRF emissions; they need the transition scores to decode, so they
    /// cannot be averaged across models.
    Crf(Array2<f64>),
}

impl HeadLogits {
    pub fn kind(&self) -> HeadKind {
        match self {
            HeadLogits::Softmax(_) => HeadKind::Softmax,
            HeadLogits::Span { .. } => HeadKind::Span,
            HeadLogits::Crf(_) => HeadKind::Crf,
        }
    }

    pub fn num_words(&self) -> usize {
        match self {
            HeadLogits::Softmax(m) | HeadLogits::Crf(m) => m.nrows(),
            HeadLogits::Span { start, .. } => start.nrows(),
        }
    }

    /// Decode softmax or span scores into BIO tags.
    pub fn decode(&self) -> Result<Vec<Tag>> {
        match self {
            HeadLogits::Softmax(m) => Ok(softmax_decode(m)),
            HeadLogits::Span { start, end } => Ok(entities_to_tags(&span_decode(start, end), start.nrows())),
            HeadLogits::Crf(_) => Err(Error::Unsupported(
                "CRF scores cannot be decoded without transitions; combine CRF runs with token_vote".into(),
            )),
        }
    }
}

/// Elementwise mean of the runs' scores.
pub fn average_logits(runs: &[HeadLogits]) -> Result<HeadLogits> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no runs to average".into()))?;
    if runs.iter().any(|r| r.kind() == HeadKind::Crf) {
        return Err(Error::Unsupported(
            "logit averaging is defined for softmax and span heads; combine CRF runs with token_vote".into(),
        ));
    }
    let n = runs.len() as f64;
    let mean = |get: &dyn Fn(&HeadLogits) -> Option<&Array2<f64>>| -> Result<Array2<f64>> {
        let base = get(first).expect("kind checked");
        let mut acc = Array2::<f64>::zeros(base.raw_dim());
        for r in runs {
            let m = get(r).ok_or_else(|| Error::InvalidArgument("runs mix head kinds".into()))?;
            if m.dim() != base.dim() {
                return Err(shape_err(format!("{:?}", base.dim()), format!("{:?}", m.dim())));
            }
            acc += m;
        }
        Ok(acc / n)
    };
    match first {
        HeadLogits::Softmax(_) => Ok(HeadLogits::Softmax(mean(&|r| match r {
            HeadLogits::Softmax(m) => Some(m),
            _ => None,
        })?)),
        HeadLogits::Span { .. } => Ok(HeadLogits::Span {
            start: mean(&|r| match r {
                HeadLogits::Span { start, .. } => Some(start),
                _ => None,
            })?,
            end: mean(&|r| match r {
                HeadLogits::Span { end, .. } => Some(end),
                _ => None,
            })?,
        }),
        HeadLogits::Crf(_) => unreachable!(),
    }
}

/// Weighted per-token vote. Ties go to the tag proposed by the
/// lowest-index run among the tied tags; the result is BIO-repaired.
pub fn token_vote(runs: &[Vec<Tag>], weights: &[f64]) -> Result<Vec<Tag>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no runs to vote".into()))?;
    if weights.len() != runs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} runs",
            weights.len(),
            runs.len()
        )));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || weights.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidArgument("weights must be finite, nonnegative and not all zero".into()));
    }
    if let Some(bad) = runs.iter().find(|r| r.len() != first.len()) {
        return Err(shape_err(format!("{} tags", first.len()), format!("{} tags", bad.len())));
    }
    let mut out = Vec::with_capacity(first.len());
    // (tag, summed weight, first run proposing it)
    let mut tally: Vec<(Tag, f64, usize)> = Vec::with_capacity(runs.len());
    for t in 0..first.len() {
        tally.clear();
        for (r, run) in runs.iter().enumerate() {
            match tally.iter_mut().find(|(tag, _, _)| *tag == run[t]) {
                Some(entry) => entry.1 += weights[r],
                None => tally.push((run[t], weights[r], r)),
            }
        }
        let best = tally
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
            .expect("at least one run");
        out.push(best.0);
    }
    repair_bio(&mut out);
    Ok(out)
}
