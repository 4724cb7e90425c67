//! Two-stage training, prediction and checkpoints.

use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::{prepare_example, Example, LossBreakdown, Network, Prediction, Stage, TermMask, Vocab};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::gazetteer::Gazetteer;
use crate::matcher::{build_tree, SearchTree};
use crate::metrics::evaluate;
use crate::nn::{AdamW, AdamWConfig, Container, Group, ParamStore};

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Network wiring, parameters and vocabulary.
#[derive(Debug, Clone)]
pub struct Model {
    pub net: Network,
    pub store: ParamStore,
    pub vocab: Vocab,
}

impl Model {
    /// Fresh model initialised from `config.seed`.
    pub fn new(config: &TrainConfig, vocab: Vocab) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let net = Network::new(config, vocab.len(), &mut store, &mut rng)?;
        Ok(Self { net, store, vocab })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.net.config
    }

    pub fn prepare(&self, sentences: &[Sentence], tree: &SearchTree) -> Result<Vec<Example>> {
        sentences
            .iter()
            .map(|s| prepare_example(s, &self.vocab, tree, self.config()))
            .collect()
    }

    pub fn to_container(&self) -> Container {
        let meta = serde_json::json!({
            "format": CHECKPOINT_FORMAT,
            "config": self.net.config,
            "vocab": self.vocab.words(),
        });
        let mut c = Container::new(meta);
        for id in self.store.ids() {
            c.push(self.store.name(id), self.store.value(id).clone());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let format = c.meta.get("format").and_then(|v| v.as_u64());
        if format != Some(u64::from(CHECKPOINT_FORMAT)) {
            return Err(Error::Container(format!("unsupported checkpoint format {format:?}")));
        }
        let config: TrainConfig = serde_json::from_value(
            c.meta
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Container("checkpoint has no config".into()))?,
        )?;
        let words: Vec<String> = serde_json::from_value(
            c.meta
                .get("vocab")
                .cloned()
                .ok_or_else(|| Error::Container("checkpoint has no vocabulary".into()))?,
        )?;
        let mut model = Self::new(&config, Vocab::from_words(words)?)?;
        if c.tensors.len() != model.store.len() {
            return Err(Error::Container(format!(
                "checkpoint has {} tensors, model expects {}",
                c.tensors.len(),
                model.store.len()
            )));
        }
        for (name, value) in &c.tensors {
            let id = model
                .store
                .id(name)
                .ok_or_else(|| Error::Container(format!("unexpected tensor `{name}`")))?;
            if model.store.value(id).dim() != value.dim() {
                return Err(Error::Container(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    value.dim(),
                    model.store.value(id).dim()
                )));
            }
            *model.store.value_mut(id) = value.clone();
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

fn optimizer(config: &TrainConfig) -> AdamW {
    AdamW::new(AdamWConfig {
        weight_decay: config.weight_decay,
        max_grad_norm: config.max_grad_norm,
        ..AdamWConfig::default()
    })
}

fn batch_step(
    model: &mut Model,
    batch: &[&Example],
    stage: Stage,
    opt: &mut AdamW,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<LossBreakdown> {
    let Model { net, store, .. } = model;
    store.zero_grads();
    let scale = 1.0 / batch.len() as f64;
    let mut total = LossBreakdown::default();
    for ex in batch {
        total += net.example_loss(store, ex, stage, rng.as_deref_mut(), true, scale, TermMask::ALL)?;
    }
    opt.step(store);
    Ok(total * scale)
}

/// One stage-1 update: adaptation losses only, encoder frozen.
pub fn stage1_step(model: &mut Model, batch: &[&Example], opt: &mut AdamW) -> Result<LossBreakdown> {
    model.store.set_frozen(Group::Encoder, true);
    let out = batch_step(model, batch, Stage::One, opt, None);
    model.store.set_frozen(Group::Encoder, false);
    out
}

/// One stage-2 update on every group.
pub fn stage2_step(
    model: &mut Model,
    batch: &[&Example],
    opt: &mut AdamW,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<LossBreakdown> {
    for g in Group::ALL {
        model.store.set_frozen(g, false);
    }
    batch_step(model, batch, Stage::Two, opt, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub stage: u8,
    pub epoch: usize,
    pub step: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: u8,
    pub epoch: usize,
    pub mean_loss: LossBreakdown,
    /// Dev fine macro-F1, stage 2 only.
    pub dev_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Best-dev model (or the last one when there is no dev set).
    pub model: Model,
    pub steps: Vec<StepRecord>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_dev_f1: Option<f64>,
    pub warnings: Vec<String>,
}

fn run_epoch(
    model: &mut Model,
    examples: &[Example],
    stage: Stage,
    epoch: usize,
    opt: &mut AdamW,
    rng: &mut ChaCha8Rng,
    steps: &mut Vec<StepRecord>,
) -> Result<LossBreakdown> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    let stage_no = if stage == Stage::One { 1 } else { 2 };
    let mut sum = LossBreakdown::default();
    let mut n = 0;
    for chunk in order.chunks(model.config().batch_size) {
        let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
        let loss = match stage {
            Stage::One => stage1_step(model, &batch, opt)?,
            Stage::Two => stage2_step(model, &batch, opt, Some(rng))?,
        };
        steps.push(StepRecord {
            stage: stage_no,
            epoch,
            step: steps.len(),
            loss,
        });
        sum += loss;
        n += 1;
    }
    Ok(sum * (1.0 / n.max(1) as f64))
}

/// Dev fine macro-F1 of `model`.
pub fn dev_score(model: &Model, dev: &[Example]) -> Result<f64> {
    let mut pred = Vec::with_capacity(dev.len());
    let mut gold = Vec::with_capacity(dev.len());
    for ex in dev {
        let p = model.net.predict_example(&model.store, ex)?;
        pred.push(Sentence::new(ex.sentence.id.clone(), ex.sentence.tokens.clone(), p.tags)?);
        gold.push(ex.sentence.clone());
    }
    Ok(evaluate(&pred, &gold)?.fine_macro.f1)
}

/// Stage 1 for `epochs_stage1`, then stage 2 for `epochs_stage2`, keeping
/// the stage-2 epoch with the best dev fine macro-F1 (earliest on ties).
pub fn train(config: &TrainConfig, train: &[Sentence], dev: &[Sentence], gazetteer: &Gazetteer) -> Result<TrainOutput> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut warnings = Vec::new();
    if gazetteer.is_empty() && config.uses_gazetteer() {
        let w = "gazetteer is empty; matched features are all O".to_string();
        warn!("{w}");
        warnings.push(w);
    }
    let vocab = Vocab::from_corpus(train, config)?;
    let mut model = Model::new(config, vocab)?;
    let tree = build_tree(gazetteer);
    let train_ex = model.prepare(train, &tree)?;
    let dev_ex = model.prepare(dev, &tree)?;

    // data order and dropout
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut opt = optimizer(config);
    let mut steps = Vec::new();
    let mut history = Vec::new();

    if config.uses_gazetteer() && config.variant == super::config::Variant::Scdag {
        for epoch in 0..config.epochs_stage1 {
            let mean_loss = run_epoch(&mut model, &train_ex, Stage::One, epoch, &mut opt, &mut rng, &mut steps)?;
            info!("stage 1 epoch {epoch}: L1 {:.4} L2 {:.4}", mean_loss.l1, mean_loss.l2);
            history.push(EpochRecord {
                stage: 1,
                epoch,
                mean_loss,
                dev_f1: None,
            });
        }
    }

    let mut best: Option<(usize, f64, Vec<ndarray::Array2<f64>>)> = None;
    for epoch in 0..config.epochs_stage2 {
        let mean_loss = run_epoch(&mut model, &train_ex, Stage::Two, epoch, &mut opt, &mut rng, &mut steps)?;
        let dev_f1 = if dev_ex.is_empty() {
            None
        } else {
            Some(dev_score(&model, &dev_ex)?)
        };
        info!(
            "stage 2 epoch {epoch}: L3 {:.4} L4 {:.4} dev F1 {:?}",
            mean_loss.l3, mean_loss.l4, dev_f1
        );
        history.push(EpochRecord {
            stage: 2,
            epoch,
            mean_loss,
            dev_f1,
        });
        if let Some(f1) = dev_f1 {
            if best.as_ref().is_none_or(|b| f1 > b.1) {
                best = Some((epoch, f1, model.store.snapshot()));
            }
        }
    }
    let (best_epoch, best_dev_f1) = match best {
        Some((epoch, f1, values)) => {
            model.store.restore(&values)?;
            (Some(epoch), Some(f1))
        }
        None => (None, None),
    };
    Ok(TrainOutput {
        model,
        steps,
        history,
        best_epoch,
        best_dev_f1,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct PredictOutput {
    pub predictions: Vec<Prediction>,
    /// Subwords mapped to the unknown token.
    pub unknown: usize,
}

impl PredictOutput {
    /// Input sentences relabelled with the predicted tags.
    pub fn tagged(&self, sentences: &[Sentence]) -> Result<Vec<Sentence>> {
        sentences
            .iter()
            .zip(&self.predictions)
            .map(|(s, p)| Sentence::new(s.id.clone(), s.tokens.clone(), p.tags.clone()))
            .collect()
    }
}

/// Deterministic inference; gold tags of `sentences` are ignored.
pub fn predict(model: &Model, sentences: &[Sentence], gazetteer: &Gazetteer) -> Result<PredictOutput> {
    let tree = build_tree(gazetteer);
    let mut predictions = Vec::with_capacity(sentences.len());
    let mut unknown = 0;
    for s in sentences {
        let ex = prepare_example(s, &model.vocab, &tree, model.config())?;
        unknown += ex.unknown;
        predictions.push(model.net.predict_example(&model.store, &ex)?);
    }
    Ok(PredictOutput { predictions, unknown })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::surface_from_str;
    use crate::taxonomy::FineLabel;

    fn tiny() -> (Vec<Sentence>, Gazetteer) {
        let s = vec![
            Sentence::from_strs("a", "eat kiwi now", &["O", "B-Food", "O"]).unwrap(),
            Sentence::from_strs("b", "drink cola now", &["O", "B-Drink", "O"]).unwrap(),
            Sentence::from_strs("c", "just words", &["O", "O"]).unwrap(),
        ];
        let mut g = Gazetteer::new();
        g.insert(FineLabel::from_name("Food").unwrap(), surface_from_str("kiwi"));
        (s, g)
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            hidden: 8,
            epochs_stage1: 1,
            epochs_stage2: 2,
            batch_size: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_is_init() {
        let (s, g) = tiny();
        let cfg = TrainConfig {
            epochs_stage1: 0,
            epochs_stage2: 0,
            ..small_config()
        };
        let out = train(&cfg, &s, &s, &g).unwrap();
        let fresh = Model::new(&cfg, out.model.vocab.clone()).unwrap();
        assert_eq!(out.model.store.snapshot(), fresh.store.snapshot());
        assert!(out.steps.is_empty());
    }

    #[test]
    fn deterministic_and_checkpoint_roundtrip() {
        let (s, g) = tiny();
        let a = train(&small_config(), &s, &s, &g).unwrap();
        let b = train(&small_config(), &s, &s, &g).unwrap();
        assert_eq!(a.model.store.snapshot(), b.model.store.snapshot());
        let mut buf = Vec::new();
        a.model.to_container().write(&mut buf).unwrap();
        let back = Model::from_container(&Container::read(&buf[..]).unwrap()).unwrap();
        assert_eq!(back.store.snapshot(), a.model.store.snapshot());
        let p1 = predict(&a.model, &s, &g).unwrap();
        let p2 = predict(&back, &s, &g).unwrap();
        assert_eq!(p1.predictions[0].logits, p2.predictions[0].logits);
        assert!(predict(&a.model, &[], &g).unwrap().predictions.is_empty());
    }

    #[test]
    fn empty_gazetteer_warns() {
        let (s, _) = tiny();
        let out = train(&small_config(), &s, &[], &Gazetteer::new()).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.best_epoch.is_none());
    }

    #[test]
    fn unknown_words_counted() {
        let (s, g) = tiny();
        let out = train(&small_config(), &s, &[], &g).unwrap();
        let q = vec![Sentence::from_strs("q", "eat mango", &["O", "O"]).unwrap()];
        assert_eq!(predict(&out.model, &q, &g).unwrap().unknown, 1);
    }
}
