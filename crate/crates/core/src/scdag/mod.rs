//! Gazetteer-adapted tagger and its two-stage trainer.

pub mod config;
pub mod model;
pub mod train;

pub use config::{FusionMode, TrainConfig, Variant};
pub use model::{
    entity_row_indices, entity_rows, fuse, fuse_backward, gold_tag_features, prepare_example, Example, LossBreakdown,
    Network, Prediction, Stage, TermMask, Vocab,
};
pub use train::{dev_score, predict, stage1_step, stage2_step, train, EpochRecord, Model, PredictOutput, StepRecord, TrainOutput};
