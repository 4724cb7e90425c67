//! Row-wise softmax family and KL divergence.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{shape_err, Result};

pub fn logsumexp(row: ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let lse = logsumexp(row.view());
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Softmax over each row, max-subtracted.
pub fn row_softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-mean KL divergence and its gradients w.r.t. both logit matrices.
#[derive(Debug, Clone)]
pub struct KlGrad {
    pub value: f64,
    pub d_p: Array2<f64>,
    pub d_q: Array2<f64>,
}

/// `mean_rows KL(softmax(p) || softmax(q))` with gradients into both sides.
pub fn kl_divergence(p_logits: &Array2<f64>, q_logits: &Array2<f64>) -> Result<KlGrad> {
    if p_logits.dim() != q_logits.dim() {
        return Err(shape_err(
            format!("{:?}", p_logits.dim()),
            format!("{:?}", q_logits.dim()),
        ));
    }
    let rows = p_logits.nrows();
    if rows == 0 {
        return Ok(KlGrad {
            value: 0.0,
            d_p: Array2::zeros(p_logits.raw_dim()),
            d_q: Array2::zeros(q_logits.raw_dim()),
        });
    }
    let log_p = log_softmax(p_logits);
    let log_q = log_softmax(q_logits);
    let p = log_p.mapv(f64::exp);
    let q = log_q.mapv(f64::exp);
    let diff = &log_p - &log_q;
    let per_row: Array1<f64> = (&p * &diff).sum_axis(Axis(1));
    let scale = 1.0 / rows as f64;
    // d/dp_j = P_j (a_j - KL_row), a = log P - log Q
    let d_p = (&p * &(&diff - &per_row.view().insert_axis(Axis(1)))) * scale;
    let d_q = (&q - &p) * scale;
    Ok(KlGrad {
        value: per_row.sum() * scale,
        d_p,
        d_q,
    })
}

/// KL with the `p` side gradient-stopped: `d_p` is identically zero and only
/// `d_q` carries gradient.
pub fn kl_stopgrad(p_logits: &Array2<f64>, q_logits: &Array2<f64>) -> Result<KlGrad> {
    let mut kl = kl_divergence(p_logits, q_logits)?;
    kl.d_p.fill(0.0);
    Ok(kl)
}

/// Mean token cross-entropy of `logits` against integer targets, with the gradient.
pub fn cross_entropy(logits: &Array2<f64>, targets: &[usize]) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != targets.len() {
        return Err(shape_err(
            format!("{} rows", targets.len()),
            format!("{} rows", logits.nrows()),
        ));
    }
    let n = targets.len();
    if n == 0 {
        return Ok((0.0, Array2::zeros(logits.raw_dim())));
    }
    let log_p = log_softmax(logits);
    let mut grad = log_p.mapv(f64::exp);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        loss -= log_p[[i, t]];
        grad[[i, t]] -= 1.0;
    }
    let scale = 1.0 / n as f64;
    grad *= scale;
    Ok((loss * scale, grad))
}
