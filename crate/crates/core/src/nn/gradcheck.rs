//! Central-difference gradient checking.
//!
//! Relative error of an analytic/numeric pair is
//! `|a - n| / max(|a|, |n|, REL_FLOOR)`; the floor keeps near-zero
//! gradients from turning round-off into huge ratios.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::store::ParamStore;

pub const REL_FLOOR: f64 = 1e-3;

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

pub fn max_rel_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}

/// Central-difference gradient of a scalar function of a matrix.
pub fn numeric_gradient(x: &Array2<f64>, mut f: impl FnMut(&Array2<f64>) -> f64, h: f64) -> Array2<f64> {
    let mut grad = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for (idx, g) in grad.indexed_iter_mut() {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let plus = f(&probe);
        probe[idx] = orig - h;
        let minus = f(&probe);
        probe[idx] = orig;
        *g = (plus - minus) / (2.0 * h);
    }
    grad
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_err: f64,
    pub tol: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

/// Check every parameter of `store` against central differences.
///
/// `loss` is called as `loss(store, true)` once to accumulate analytic
/// gradients (grads are zeroed beforehand) and as `loss(store, false)` for
/// every probe. Tensors with more than `max_coords` entries are subsampled
/// with a fixed seed.
pub fn grad_check<F>(store: &mut ParamStore, mut loss: F, h: f64, tol: f64, max_coords: usize) -> GradCheckReport
where
    F: FnMut(&mut ParamStore, bool) -> f64,
{
    store.zero_grads();
    loss(store, true);
    let analytic: Vec<Array2<f64>> = store.ids().map(|id| store.grad(id).clone()).collect();
    store.zero_grads();

    let mut rng = ChaCha8Rng::seed_from_u64(0x9c);
    let mut params = Vec::new();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let size = store.value(id).len();
        let cols = store.value(id).ncols();
        let coords: Vec<usize> = if size <= max_coords {
            (0..size).collect()
        } else {
            sample(&mut rng, size, max_coords).into_vec()
        };
        let mut worst: f64 = 0.0;
        for &flat in &coords {
            let idx = (flat / cols, flat % cols);
            let orig = store.value(id)[idx];
            store.value_mut(id)[idx] = orig + h;
            let plus = loss(store, false);
            store.value_mut(id)[idx] = orig - h;
            let minus = loss(store, false);
            store.value_mut(id)[idx] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_error(analytic[id.0][idx], numeric));
        }
        params.push(ParamCheck {
            name: store.name(id).to_string(),
            coords_checked: coords.len(),
            max_rel_err: worst,
        });
    }
    let max_rel_err = params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max);
    GradCheckReport {
        params,
        max_rel_err,
        tol,
        passed: max_rel_err < tol,
    }
}
