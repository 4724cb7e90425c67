//! Gazetteer-enhanced fine-grained named entity recognition.
//!
//! Corpus handling, gazetteer construction and matching, a small
//! hand-differentiated network toolkit, three tagging heads, the two-stage
//! gazetteer-adaptation trainer, ensembling and exact-span metrics.

pub mod augment;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod gazetteer;
pub mod heads;
pub mod matcher;
pub mod metrics;
pub mod nn;
pub mod scdag;
pub mod subword;
pub mod synth;
pub mod taxonomy;

pub use error::{Error, Result};
