use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter groups; each has its own learning rate and frozen flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Encoder,
    GazetteerNet,
    ProjGaz,
    ProjEnc,
    Fusion,
    Classifier,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::Encoder,
        Group::GazetteerNet,
        Group::ProjGaz,
        Group::ProjEnc,
        Group::Fusion,
        Group::Classifier,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// A value with a same-shape gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Tensor {
    pub fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self { value, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    group: Group,
    tensor: Tensor,
}

/// Named, grouped trainable parameters.
#[derive(Debug, Clone)]
pub struct ParamStore {
    slots: Vec<Slot>,
    by_name: HashMap<String, ParamId>,
    frozen: [bool; 6],
    lr: [f64; 6],
}

impl Default for ParamStore {
    fn default() -> Self {
        Self {
            slots: Vec::new(),
            by_name: HashMap::new(),
            frozen: [false; 6],
            lr: [1e-3; 6],
        }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, group: Group, value: Array2<f64>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name `{name}`")));
        }
        let id = ParamId(self.slots.len());
        self.by_name.insert(name.clone(), id);
        self.slots.push(Slot {
            name,
            group,
            tensor: Tensor::new(value),
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn group(&self, id: ParamId) -> Group {
        self.slots[id.0].group
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.slots[id.0].tensor.value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.slots[id.0].tensor.value
    }

    pub fn grad(&self, id: ParamId) -> &Array2<f64> {
        &self.slots[id.0].tensor.grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.slots[id.0].tensor.grad
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.slots[id.0].tensor
    }

    pub fn zero_grads(&mut self) {
        for s in &mut self.slots {
            s.tensor.grad.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for s in &mut self.slots {
            s.tensor.grad *= factor;
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.slots
            .iter()
            .map(|s| s.tensor.grad.iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn set_frozen(&mut self, group: Group, frozen: bool) {
        self.frozen[group.index()] = frozen;
    }

    pub fn is_frozen(&self, group: Group) -> bool {
        self.frozen[group.index()]
    }

    pub fn set_lr(&mut self, group: Group, lr: f64) {
        self.lr[group.index()] = lr;
    }

    pub fn lr(&self, group: Group) -> f64 {
        self.lr[group.index()]
    }

    /// Copy of every parameter value, in id order.
    pub fn snapshot(&self) -> Vec<Array2<f64>> {
        self.slots.iter().map(|s| s.tensor.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Array2<f64>]) -> Result<()> {
        if values.len() != self.slots.len() {
            return Err(Error::InvalidArgument("snapshot size mismatch".into()));
        }
        for (s, v) in self.slots.iter_mut().zip(values) {
            if s.tensor.value.dim() != v.dim() {
                return Err(crate::error::shape_err(
                    format!("{:?}", s.tensor.value.dim()),
                    format!("{:?}", v.dim()),
                ));
            }
            s.tensor.value.assign(v);
        }
        Ok(())
    }

    pub fn group_values(&self, group: Group) -> Vec<Array2<f64>> {
        self.slots
            .iter()
            .filter(|s| s.group == group)
            .map(|s| s.tensor.value.clone())
            .collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.tensor.value.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_unique() {
        let mut s = ParamStore::new();
        s.add("w", Group::Encoder, Array2::zeros((2, 2))).unwrap();
        assert!(s.add("w", Group::Classifier, Array2::zeros((1, 1))).is_err());
        assert_eq!(s.id("w"), Some(ParamId(0)));
        assert_eq!(s.grad(ParamId(0)).dim(), (2, 2));
    }

    #[test]
    fn snapshot_restore() {
        let mut s = ParamStore::new();
        let id = s.add("w", Group::Encoder, Array2::ones((2, 3))).unwrap();
        let snap = s.snapshot();
        s.value_mut(id).fill(5.0);
        s.restore(&snap).unwrap();
        assert_eq!(s.value(id), &Array2::<f64>::ones((2, 3)));
    }
}
