//! Dense, embedding and recurrent layers with hand-written backward passes.
//!
//! Layers only hold [`ParamId`]s; values and gradients live in a
//! [`ParamStore`]. `forward` reads the store, `backward` accumulates into it
//! and returns the gradient with respect to the layer input.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::store::{Group, ParamId, ParamStore};
use crate::error::{shape_err, Result};

pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: Group,
        input: usize,
        output: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let bound = 1.0 / (input as f64).sqrt();
        let w = store.add(format!("{name}.w"), group, uniform(input, output, bound, rng))?;
        let b = store.add(format!("{name}.b"), group, Array2::zeros((1, output)))?;
        Ok(Self { w, b, input, output })
    }

    pub fn forward(&self, store: &ParamStore, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input {
            return Err(shape_err(format!("{} columns", self.input), format!("{} columns", x.ncols())));
        }
        Ok(x.dot(store.value(self.w)) + store.value(self.b))
    }

    pub fn backward(&self, store: &mut ParamStore, x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        *store.grad_mut(self.w) += &x.t().dot(dy);
        *store.grad_mut(self.b) += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&store.value(self.w).t())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub dim: usize,
}

impl Embedding {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: Group,
        vocab: usize,
        dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let table = store.add(format!("{name}.table"), group, uniform(vocab, dim, 0.1, rng))?;
        Ok(Self { table, dim })
    }

    pub fn forward(&self, store: &ParamStore, ids: &[usize]) -> Array2<f64> {
        let table = store.value(self.table);
        let mut out = Array2::zeros((ids.len(), self.dim));
        for (i, &id) in ids.iter().enumerate() {
            out.row_mut(i).assign(&table.row(id));
        }
        out
    }

    pub fn backward(&self, store: &mut ParamStore, ids: &[usize], dy: &Array2<f64>) {
        let grad = store.grad_mut(self.table);
        for (i, &id) in ids.iter().enumerate() {
            let mut row = grad.row_mut(id);
            row += &dy.row(i);
        }
    }
}

/// One direction of a gated recurrent layer. Gate column order: input,
/// forget, cell candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct Lstm {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

/// Per-step activations kept for the backward pass, indexed by position.
#[derive(Debug, Clone)]
pub struct LstmCache {
    reverse: bool,
    gates: Array2<f64>,
    cells: Array2<f64>,
    cells_prev: Array2<f64>,
    hidden_prev: Array2<f64>,
    tanh_cells: Array2<f64>,
    pub output: Array2<f64>,
}

fn sig(x: f64) -> f64 {
    super::functional::sigmoid(x)
}

impl Lstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: Group,
        input: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let bx = 1.0 / (input as f64).sqrt();
        let bh = 1.0 / (hidden as f64).sqrt();
        let wx = store.add(format!("{name}.wx"), group, uniform(input, 4 * hidden, bx, rng))?;
        let wh = store.add(format!("{name}.wh"), group, uniform(hidden, 4 * hidden, bh, rng))?;
        let mut bias = Array2::zeros((1, 4 * hidden));
        bias.slice_mut(s![.., hidden..2 * hidden]).fill(1.0);
        let b = store.add(format!("{name}.b"), group, bias)?;
        Ok(Self {
            wx,
            wh,
            b,
            input,
            hidden,
        })
    }

    fn order(n: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
        if reverse {
            Box::new((0..n).rev())
        } else {
            Box::new(0..n)
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Array2<f64>, reverse: bool) -> Result<LstmCache> {
        if x.ncols() != self.input {
            return Err(shape_err(format!("{} columns", self.input), format!("{} columns", x.ncols())));
        }
        let n = x.nrows();
        let h = self.hidden;
        let pre = x.dot(store.value(self.wx)) + store.value(self.b);
        let wh = store.value(self.wh);
        let mut cache = LstmCache {
            reverse,
            gates: Array2::zeros((n, 4 * h)),
            cells: Array2::zeros((n, h)),
            cells_prev: Array2::zeros((n, h)),
            hidden_prev: Array2::zeros((n, h)),
            tanh_cells: Array2::zeros((n, h)),
            output: Array2::zeros((n, h)),
        };
        let mut h_prev = Array1::<f64>::zeros(h);
        let mut c_prev = Array1::<f64>::zeros(h);
        for t in Self::order(n, reverse) {
            let z = &pre.row(t) + &h_prev.dot(wh);
            let mut gates = cache.gates.row_mut(t);
            for k in 0..h {
                gates[k] = sig(z[k]);
                gates[h + k] = sig(z[h + k]);
                gates[2 * h + k] = z[2 * h + k].tanh();
                gates[3 * h + k] = sig(z[3 * h + k]);
            }
            let mut c = Array1::<f64>::zeros(h);
            for k in 0..h {
                c[k] = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
            }
            let tc = c.mapv(f64::tanh);
            let hv = &tc * &gates.slice(s![3 * h..]);
            cache.cells_prev.row_mut(t).assign(&c_prev);
            cache.hidden_prev.row_mut(t).assign(&h_prev);
            cache.cells.row_mut(t).assign(&c);
            cache.tanh_cells.row_mut(t).assign(&tc);
            cache.output.row_mut(t).assign(&hv);
            h_prev = hv;
            c_prev = c;
        }
        Ok(cache)
    }

    /// Backpropagate `dh` (gradient w.r.t. every output row) through time.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        x: &Array2<f64>,
        cache: &LstmCache,
        dh: &Array2<f64>,
    ) -> Array2<f64> {
        let n = x.nrows();
        let h = self.hidden;
        let mut dz_all = Array2::<f64>::zeros((n, 4 * h));
        {
            let wh = store.value(self.wh);
            let mut dh_next = Array1::<f64>::zeros(h);
            let mut dc_next = Array1::<f64>::zeros(h);
            // Walk positions in the opposite order of the forward pass.
            for t in Self::order(n, !cache.reverse) {
                let g = cache.gates.row(t);
                let tc = cache.tanh_cells.row(t);
                let c_prev = cache.cells_prev.row(t);
                let dht = &dh.row(t) + &dh_next;
                let mut dz = dz_all.row_mut(t);
                let mut dc_prev = Array1::<f64>::zeros(h);
                for k in 0..h {
                    let (i, f, cand, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                    let d_o = dht[k] * tc[k];
                    let dc = dc_next[k] + dht[k] * o * (1.0 - tc[k] * tc[k]);
                    dz[k] = dc * cand * i * (1.0 - i);
                    dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
                    dz[2 * h + k] = dc * i * (1.0 - cand * cand);
                    dz[3 * h + k] = d_o * o * (1.0 - o);
                    dc_prev[k] = dc * f;
                }
                dh_next = dz.dot(&wh.t());
                dc_next = dc_prev;
            }
        }
        *store.grad_mut(self.wx) += &x.t().dot(&dz_all);
        *store.grad_mut(self.wh) += &cache.hidden_prev.t().dot(&dz_all);
        *store.grad_mut(self.b) += &dz_all.sum_axis(Axis(0)).insert_axis(Axis(0));
        dz_all.dot(&store.value(self.wx).t())
    }
}

/// Forward and backward recurrences concatenated per position: `[fwd | bwd]`.
#[derive(Debug, Clone, Copy)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
    pub output: Array2<f64>,
}

impl BiLstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        group: Group,
        input: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(Self {
            fwd: Lstm::new(store, &format!("{name}.fwd"), group, input, hidden, rng)?,
            bwd: Lstm::new(store, &format!("{name}.bwd"), group, input, hidden, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.fwd.hidden
    }

    pub fn forward(&self, store: &ParamStore, x: &Array2<f64>) -> Result<BiLstmCache> {
        let fwd = self.fwd.forward(store, x, false)?;
        let bwd = self.bwd.forward(store, x, true)?;
        let output = ndarray::concatenate![Axis(1), fwd.output, bwd.output];
        Ok(BiLstmCache { fwd, bwd, output })
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        x: &Array2<f64>,
        cache: &BiLstmCache,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let h = self.fwd.hidden;
        let d_f = dy.slice(s![.., ..h]).to_owned();
        let d_b = dy.slice(s![.., h..]).to_owned();
        let dx = self.fwd.backward(store, x, &cache.fwd, &d_f);
        dx + self.bwd.backward(store, x, &cache.bwd, &d_b)
    }
}

/// Inverted dropout mask (entries 0 or `1/(1-p)`).
pub fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < p { 0.0 } else { keep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_rel_error, numeric_gradient};
    use ndarray::array;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn dense_identity_and_scalar() {
        let mut store = ParamStore::new();
        let d = Dense::new(&mut store, "d", Group::Classifier, 3, 3, &mut rng()).unwrap();
        *store.value_mut(d.w) = Array2::eye(3);
        let x = array![[1.0, -2.0, 0.5]];
        assert_eq!(d.forward(&store, &x).unwrap(), x);

        let d1 = Dense::new(&mut store, "s", Group::Classifier, 1, 1, &mut rng()).unwrap();
        *store.value_mut(d1.w) = array![[3.0]];
        *store.value_mut(d1.b) = array![[1.0]];
        assert_eq!(d1.forward(&store, &array![[2.0]]).unwrap()[[0, 0]], 7.0);
        assert!(d.forward(&store, &array![[1.0]]).is_err());
    }

    #[test]
    fn dense_input_gradient() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let d = Dense::new(&mut store, "d", Group::Classifier, 5, 3, &mut r).unwrap();
        let x = uniform(4, 5, 1.0, &mut r);
        let weights = uniform(4, 3, 1.0, &mut r);
        let loss = |x: &Array2<f64>| (d.forward(&store, x).unwrap() * &weights).sum();
        let numeric = numeric_gradient(&x, loss, 1e-5);
        let mut s2 = store.clone();
        let analytic = d.backward(&mut s2, &x, &weights);
        assert!(max_rel_error(&analytic, &numeric) < 1e-6);
    }

    #[test]
    fn single_step_bilstm_halves_share_input() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let bi = BiLstm::new(&mut store, "b", Group::Encoder, 2, 3, &mut r).unwrap();
        // tie the two directions
        let (fwx, fwh, fb) = (bi.fwd.wx, bi.fwd.wh, bi.fwd.b);
        let (v1, v2, v3) = (store.value(fwx).clone(), store.value(fwh).clone(), store.value(fb).clone());
        *store.value_mut(bi.bwd.wx) = v1;
        *store.value_mut(bi.bwd.wh) = v2;
        *store.value_mut(bi.bwd.b) = v3;
        let x = array![[0.3, -0.7]];
        let out = bi.forward(&store, &x).unwrap().output;
        for k in 0..3 {
            assert!((out[[0, k]] - out[[0, 3 + k]]).abs() < 1e-15);
        }
    }

    #[test]
    fn reversal_swaps_halves_when_tied() {
        let mut store = ParamStore::new();
        let mut r = rng();
        let bi = BiLstm::new(&mut store, "b", Group::Encoder, 2, 2, &mut r).unwrap();
        for (a, b) in [(bi.fwd.wx, bi.bwd.wx), (bi.fwd.wh, bi.bwd.wh), (bi.fwd.b, bi.bwd.b)] {
            let v = store.value(a).clone();
            *store.value_mut(b) = v;
        }
        let x = uniform(4, 2, 1.0, &mut r);
        let mut xr = x.clone();
        xr.invert_axis(Axis(0));
        let y = bi.forward(&store, &x).unwrap().output;
        let mut yr = bi.forward(&store, &xr).unwrap().output;
        yr.invert_axis(Axis(0));
        for t in 0..4 {
            for k in 0..2 {
                assert!((y[[t, k]] - yr[[t, 2 + k]]).abs() < 1e-14);
                assert!((y[[t, 2 + k]] - yr[[t, k]]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn embedding_rows() {
        let mut store = ParamStore::new();
        let e = Embedding::new(&mut store, "e", Group::Encoder, 4, 3, &mut rng()).unwrap();
        let out = e.forward(&store, &[2, 2, 0]);
        assert_eq!(out.row(0), out.row(1));
        assert_eq!(out.row(2), store.value(e.table).row(0));
        e.backward(&mut store, &[2, 2], &Array2::ones((2, 3)));
        assert_eq!(store.grad(e.table).row(2).sum(), 6.0);
        assert_eq!(store.grad(e.table).row(1).sum(), 0.0);
    }

    #[test]
    fn dropout_scale() {
        let m = dropout_mask(100, 100, 0.25, &mut rng());
        assert!(m.iter().all(|&v| v == 0.0 || (v - 4.0 / 3.0).abs() < 1e-15));
        let kept = m.iter().filter(|&&v| v > 0.0).count() as f64 / 1e4;
        assert!((kept - 0.75).abs() < 0.03);
    }
}
