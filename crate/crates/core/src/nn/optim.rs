use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::store::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Clip the global gradient norm to this value before the update.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            max_grad_norm: None,
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update to every unfrozen parameter, then clear all gradients.
    pub fn step(&mut self, store: &mut ParamStore) {
        if self.m.len() != store.len() {
            self.m = store.ids().map(|id| Array2::zeros(store.value(id).raw_dim())).collect();
            self.v = self.m.clone();
        }
        if let Some(max) = self.config.max_grad_norm {
            let norm = store.grad_norm();
            if norm > max {
                store.scale_grads(max / norm);
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            let group = store.group(id);
            if store.is_frozen(group) {
                continue;
            }
            let lr = store.lr(group);
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let tensor = store.tensor_mut(id);
            ndarray::Zip::from(&mut tensor.value)
                .and(&tensor.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    let m_hat = *m / bias1;
                    let v_hat = *v / bias2;
                    *w -= lr * c.weight_decay * *w;
                    *w -= lr * m_hat / (v_hat.sqrt() + c.eps);
                });
        }
        store.zero_grads();
    }
}
