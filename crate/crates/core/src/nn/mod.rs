//! Minimal differentiable layer toolkit: parameters with gradient slots,
//! explicit forward/backward layers, losses, AdamW and gradient checking.

pub mod container;
pub mod functional;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod store;

pub use container::Container;
pub use functional::{cross_entropy, kl_divergence, kl_stopgrad, log_softmax, logsumexp, row_softmax, KlGrad};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{BiLstm, Dense, Embedding, Lstm};
pub use optim::{AdamW, AdamWConfig};
pub use store::{Group, ParamId, ParamStore, Tensor};
