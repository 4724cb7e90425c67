//! Linear-chain CRF: log-space forward algorithm, gold-path negative
//! log-likelihood with exact gradients (forward-backward marginals), and
//! Viterbi decoding.
//!
//! Scores of a path `y` over emissions `E`:
//! `start[y0] + Σ E[t, yt] + Σ trans[y(t-1), yt] + end[y(N-1)]`.

use ndarray::{Array1, Array2};

use crate::error::{shape_err, Error, Result};
use crate::nn::logsumexp;
use crate::taxonomy::{Tag, NUM_TAGS};

#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    /// `transitions[[from, to]]`.
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct CrfGrads {
    pub emissions: Array2<f64>,
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

impl CrfParams {
    pub fn zeros(k: usize) -> Self {
        Self {
            transitions: Array2::zeros((k, k)),
            start: Array1::zeros(k),
            end: Array1::zeros(k),
        }
    }

    pub fn num_tags(&self) -> usize {
        self.start.len()
    }

    fn check(&self, emissions: &Array2<f64>) -> Result<()> {
        let k = self.num_tags();
        if emissions.ncols() != k || self.transitions.dim() != (k, k) || self.end.len() != k {
            return Err(shape_err(format!("{k} tags"), format!("{} emission columns", emissions.ncols())));
        }
        if emissions.nrows() == 0 {
            return Err(Error::InvalidArgument("CRF needs at least one position".into()));
        }
        Ok(())
    }

    pub fn path_score(&self, emissions: &Array2<f64>, path: &[usize]) -> f64 {
        let mut s = self.start[path[0]] + self.end[path[path.len() - 1]];
        for (t, &y) in path.iter().enumerate() {
            s += emissions[[t, y]];
            if t > 0 {
                s += self.transitions[[path[t - 1], y]];
            }
        }
        s
    }
}

/// Additive transition penalty forbidding `X → I-Y` unless `X ∈ {B-Y, I-Y}`
/// and starting in an `I-` tag. Applied on top of learned scores.
pub fn bio_mask(penalty: f64) -> CrfParams {
    let mut m = CrfParams::zeros(NUM_TAGS);
    for to in Tag::all().filter(|t| t.is_inside()) {
        m.start[to.0] = penalty;
        for from in Tag::all() {
            if from.label() != to.label() {
                m.transitions[[from.0, to.0]] = penalty;
            }
        }
    }
    m
}

/// Forward log-messages `alpha[[t, y]]` (including emissions at `t`).
fn forward_messages(emissions: &Array2<f64>, crf: &CrfParams) -> Array2<f64> {
    let (n, k) = emissions.dim();
    let mut alpha = Array2::zeros((n, k));
    alpha.row_mut(0).assign(&(&crf.start + &emissions.row(0)));
    let mut buf = Array1::zeros(k);
    for t in 1..n {
        for y in 0..k {
            for x in 0..k {
                buf[x] = alpha[[t - 1, x]] + crf.transitions[[x, y]];
            }
            alpha[[t, y]] = logsumexp(buf.view()) + emissions[[t, y]];
        }
    }
    alpha
}

/// Backward log-messages `beta[[t, y]]` (excluding emissions at `t`, including `end`).
fn backward_messages(emissions: &Array2<f64>, crf: &CrfParams) -> Array2<f64> {
    let (n, k) = emissions.dim();
    let mut beta = Array2::zeros((n, k));
    beta.row_mut(n - 1).assign(&crf.end);
    let mut buf = Array1::zeros(k);
    for t in (0..n - 1).rev() {
        for x in 0..k {
            for y in 0..k {
                buf[y] = crf.transitions[[x, y]] + emissions[[t + 1, y]] + beta[[t + 1, y]];
            }
            beta[[t, x]] = logsumexp(buf.view());
        }
    }
    beta
}

/// Log-partition function by the forward algorithm.
pub fn log_partition(emissions: &Array2<f64>, crf: &CrfParams) -> Result<f64> {
    crf.check(emissions)?;
    let alpha = forward_messages(emissions, crf);
    let last = &alpha.row(emissions.nrows() - 1) + &crf.end;
    Ok(logsumexp(last.view()))
}

/// `logZ - score(gold)` and its exact gradient.
pub fn crf_nll(emissions: &Array2<f64>, crf: &CrfParams, gold: &[usize]) -> Result<(f64, CrfGrads)> {
    crf.check(emissions)?;
    let (n, k) = emissions.dim();
    if gold.len() != n {
        return Err(shape_err(format!("{n} gold tags"), gold.len()));
    }
    let alpha = forward_messages(emissions, crf);
    let beta = backward_messages(emissions, crf);
    let log_z = logsumexp((&alpha.row(n - 1) + &crf.end).view());

    // Expected counts minus gold counts.
    let mut d_em = &alpha + &beta;
    d_em.mapv_inplace(|v| (v - log_z).exp());
    let d_start = d_em.row(0).to_owned();
    let d_end = d_em.row(n - 1).to_owned();
    let mut d_trans = Array2::zeros((k, k));
    for t in 1..n {
        for x in 0..k {
            let a = alpha[[t - 1, x]];
            for y in 0..k {
                d_trans[[x, y]] +=
                    (a + crf.transitions[[x, y]] + emissions[[t, y]] + beta[[t, y]] - log_z).exp();
            }
        }
    }
    let mut grads = CrfGrads {
        emissions: d_em,
        transitions: d_trans,
        start: d_start,
        end: d_end,
    };
    for (t, &y) in gold.iter().enumerate() {
        grads.emissions[[t, y]] -= 1.0;
        if t > 0 {
            grads.transitions[[gold[t - 1], y]] -= 1.0;
        }
    }
    grads.start[gold[0]] -= 1.0;
    grads.end[gold[n - 1]] -= 1.0;
    Ok((log_z - crf.path_score(emissions, gold), grads))
}

/// Highest-scoring path; ties resolve to the lowest tag index.
pub fn crf_viterbi(emissions: &Array2<f64>, crf: &CrfParams) -> Result<Vec<usize>> {
    crf.check(emissions)?;
    let (n, k) = emissions.dim();
    let mut score = &crf.start + &emissions.row(0);
    let mut back = Array2::<usize>::zeros((n, k));
    for t in 1..n {
        let mut next = Array1::zeros(k);
        for y in 0..k {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for x in 0..k {
                let v = score[x] + crf.transitions[[x, y]];
                if v > best_v {
                    best_v = v;
                    best = x;
                }
            }
            back[[t, y]] = best;
            next[y] = best_v + emissions[[t, y]];
        }
        score = next;
    }
    score += &crf.end;
    let mut last = 0;
    for y in 1..k {
        if score[y] > score[last] {
            last = y;
        }
    }
    let mut path = vec![last; n];
    for t in (1..n).rev() {
        path[t - 1] = back[[t, path[t]]];
    }
    Ok(path)
}
