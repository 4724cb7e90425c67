//! The gazetteer-enhanced tagger: a word-embedding + BiLSTM encoder, a
//! gazetteer network (dense + BiLSTM over 67-slot BIO features), two tag-space
//! projections used by the adaptation losses, a fusion step and one of three
//! heads.
//!
//! All heads score words: the fused subword representation is gathered at
//! each word's first subword before the head is applied.

use std::collections::HashMap;

use ndarray::{concatenate, s, Array2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{FusionMode, TrainConfig};
use crate::corpus::{entities_to_tags, repair_bio, Entity, Sentence};
use crate::ensemble::HeadLogits;
use crate::error::{shape_err, Error, Result};
use crate::heads::{bio_mask, crf_nll, crf_viterbi, span_decode, span_loss, CrfParams, HeadKind, SPAN_CLASSES};
use crate::matcher::{align_to_subwords, featurize, match_sentence, SearchTree};
use crate::nn::functional::sigmoid;
use crate::nn::layers::{dropout_mask, BiLstm, BiLstmCache, Dense, Embedding};
use crate::nn::{cross_entropy, kl_stopgrad, Group, ParamId, ParamStore};
use crate::subword::{subword_tokenize, TokenizedSentence};
use crate::taxonomy::{Tag, NUM_TAGS};

pub const UNK: &str = "<unk>";

/// Subword vocabulary; index 0 is the unknown token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build<'a>(subwords: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Self {
            words: vec![UNK.to_string()],
            index: HashMap::new(),
        };
        v.index.insert(UNK.to_string(), 0);
        for w in subwords {
            let w = w.to_lowercase();
            if !v.index.contains_key(&w) {
                v.index.insert(w.clone(), v.words.len());
                v.words.push(w);
            }
        }
        v
    }

    pub fn from_corpus(sentences: &[Sentence], config: &TrainConfig) -> Result<Self> {
        let mut all = Vec::new();
        for s in sentences {
            all.extend(subword_tokenize(s, config.subword)?.subwords);
        }
        Ok(Self::build(all.iter().map(String::as_str)))
    }

    pub fn from_words(words: Vec<String>) -> Result<Self> {
        if words.first().map(String::as_str) != Some(UNK) {
            return Err(Error::InvalidArgument("vocabulary must start with the unknown token".into()));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self { words, index })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, subword: &str) -> Option<usize> {
        self.index.get(&subword.to_lowercase()).copied()
    }
}

/// A sentence with everything the network consumes precomputed.
#[derive(Debug, Clone)]
pub struct Example {
    pub sentence: Sentence,
    pub ts: TokenizedSentence,
    pub ids: Vec<usize>,
    pub unknown: usize,
    /// Gold-tag one-hot rows, aligned to subwords (`N × 67`).
    pub gold_features: Array2<f64>,
    /// Gazetteer-matched multi-hot rows, aligned to subwords (`N × 67`).
    pub match_features: Array2<f64>,
    /// Subword rows of words inside gold entities, in sentence order.
    pub entity_rows: Vec<usize>,
    pub entities: Vec<Entity>,
}

/// Word `w`'s row is the one-hot of its gold tag, copied to its first subword.
pub fn gold_tag_features(s: &Sentence, ts: &TokenizedSentence) -> Result<Array2<f64>> {
    let mut words = Array2::zeros((s.len(), NUM_TAGS));
    for (i, t) in s.tags.iter().enumerate() {
        words[[i, t.0]] = 1.0;
    }
    align_to_subwords(&words, ts)
}

/// First-subword rows of every token covered by a gold entity.
pub fn entity_row_indices(s: &Sentence, ts: &TokenizedSentence) -> Vec<usize> {
    s.entities()
        .iter()
        .flat_map(|e| (e.start..=e.end).map(|w| ts.first_subword_of_word[w]))
        .collect()
}

/// Gather the entity rows of a logit matrix (`E × 67`, possibly `E = 0`).
pub fn entity_rows(logits: &Array2<f64>, s: &Sentence, ts: &TokenizedSentence) -> Array2<f64> {
    gather_rows(logits, &entity_row_indices(s, ts))
}

pub fn gather_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

fn scatter_add_rows(target: &mut Array2<f64>, rows: &[usize], src: &Array2<f64>) {
    for (i, &r) in rows.iter().enumerate() {
        let mut row = target.row_mut(r);
        row += &src.row(i);
    }
}

/// `σ(λ)⊙s + (1-σ(λ))⊙g` or `[s | g]`.
pub fn fuse(s: &Array2<f64>, g: &Array2<f64>, mode: FusionMode, lambda: Option<&Array2<f64>>) -> Result<Array2<f64>> {
    if s.dim() != g.dim() {
        return Err(shape_err(format!("{:?}", s.dim()), format!("{:?}", g.dim())));
    }
    match mode {
        FusionMode::Concat => Ok(concatenate![Axis(1), *s, *g]),
        FusionMode::WeightedSum => {
            let lambda = lambda.ok_or_else(|| Error::InvalidArgument("weighted sum needs λ".into()))?;
            if lambda.dim() != (1, s.ncols()) {
                return Err(shape_err(format!("(1, {})", s.ncols()), format!("{:?}", lambda.dim())));
            }
            let w = lambda.mapv(sigmoid);
            Ok(&w * s + &(1.0 - &w) * g)
        }
    }
}

/// Gradients of [`fuse`]: `(d_s, d_g, d_lambda)`.
pub fn fuse_backward(
    s: &Array2<f64>,
    g: &Array2<f64>,
    mode: FusionMode,
    lambda: Option<&Array2<f64>>,
    dy: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Option<Array2<f64>>) {
    match mode {
        FusionMode::Concat => {
            let d = s.ncols();
            (
                dy.slice(s![.., ..d]).to_owned(),
                dy.slice(s![.., d..]).to_owned(),
                None,
            )
        }
        FusionMode::WeightedSum => {
            let w = lambda.expect("weighted sum needs λ").mapv(sigmoid);
            let d_s = dy * &w;
            let d_g = dy * &(1.0 - &w);
            let dw = (dy * &(s - g)).sum_axis(Axis(0)).insert_axis(Axis(0));
            let d_lambda = dw * &w.mapv(|v| v * (1.0 - v));
            (d_s, d_g, Some(d_lambda))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

impl std::ops::AddAssign for LossBreakdown {
    fn add_assign(&mut self, o: Self) {
        self.l1 += o.l1;
        self.l2 += o.l2;
        self.l3 += o.l3;
        self.l4 += o.l4;
    }
}

impl std::ops::Mul<f64> for LossBreakdown {
    type Output = Self;

    fn mul(self, k: f64) -> Self {
        Self {
            l1: self.l1 * k,
            l2: self.l2 * k,
            l3: self.l3 * k,
            l4: self.l4 * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Adaptation only (`L1 + L2`), encoder frozen.
    One,
    /// `α(L1 + L2) + L3`.
    Two,
}

/// Which loss terms contribute gradient; values are always reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermMask {
    /// `KL(sg(g) || s)`: gradient into the encoder side.
    pub kl_into_encoder: bool,
    /// `KL(sg(s) || g)`: gradient into the gazetteer side.
    pub kl_into_gazetteer: bool,
    pub supervised: bool,
}

impl TermMask {
    pub const ALL: TermMask = TermMask {
        kl_into_encoder: true,
        kl_into_gazetteer: true,
        supervised: true,
    };
}

#[derive(Debug, Clone, Copy)]
enum HeadParams {
    Softmax {
        out: Dense,
    },
    Crf {
        out: Dense,
        transitions: ParamId,
        start: ParamId,
        end: ParamId,
    },
    Span {
        start: Dense,
        end: Dense,
    },
}

/// Layer wiring; parameter values live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Network {
    pub config: TrainConfig,
    embedding: Embedding,
    encoder: BiLstm,
    gaz_dense: Dense,
    gaz_rnn: BiLstm,
    proj_gaz: Dense,
    proj_enc: Dense,
    lambda: Option<ParamId>,
    head: HeadParams,
    crf_mask: Option<CrfParams>,
}

struct GazPass {
    pre: Array2<f64>,
    cache: BiLstmCache,
}

/// Output of a forward pass in evaluation mode.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub logits: HeadLogits,
    pub tags: Vec<Tag>,
}

impl Network {
    pub fn new(config: &TrainConfig, vocab_size: usize, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let d = config.hidden;
        let embedding = Embedding::new(store, "encoder.embedding", Group::Encoder, vocab_size, d, rng)?;
        let encoder = BiLstm::new(store, "encoder.rnn", Group::Encoder, d, d / 2, rng)?;
        let gaz_dense = Dense::new(store, "gazetteer_net.dense", Group::GazetteerNet, NUM_TAGS, d, rng)?;
        let gaz_rnn = BiLstm::new(store, "gazetteer_net.rnn", Group::GazetteerNet, d, d / 2, rng)?;
        let proj_gaz = Dense::new(store, "proj_gaz", Group::ProjGaz, d, NUM_TAGS, rng)?;
        let proj_enc = Dense::new(store, "proj_enc", Group::ProjEnc, d, NUM_TAGS, rng)?;
        let lambda = match config.fusion_mode {
            FusionMode::WeightedSum => Some(store.add("fusion.lambda", Group::Fusion, Array2::zeros((1, d)))?),
            FusionMode::Concat => None,
        };
        let width = Self::head_input_width(config);
        let head = match config.classifier {
            HeadKind::Softmax => HeadParams::Softmax {
                out: Dense::new(store, "classifier.out", Group::Classifier, width, NUM_TAGS, rng)?,
            },
            HeadKind::Crf => HeadParams::Crf {
                out: Dense::new(store, "classifier.out", Group::Classifier, width, NUM_TAGS, rng)?,
                transitions: store.add("classifier.crf.transitions", Group::Classifier, Array2::zeros((NUM_TAGS, NUM_TAGS)))?,
                start: store.add("classifier.crf.start", Group::Classifier, Array2::zeros((1, NUM_TAGS)))?,
                end: store.add("classifier.crf.end", Group::Classifier, Array2::zeros((1, NUM_TAGS)))?,
            },
            HeadKind::Span => HeadParams::Span {
                start: Dense::new(store, "classifier.start", Group::Classifier, width, SPAN_CLASSES, rng)?,
                end: Dense::new(store, "classifier.end", Group::Classifier, width, SPAN_CLASSES, rng)?,
            },
        };
        store.set_lr(Group::Encoder, config.lr_encoder);
        store.set_lr(Group::ProjEnc, config.lr_encoder);
        store.set_lr(Group::GazetteerNet, config.lr_gazetteer);
        store.set_lr(Group::ProjGaz, config.lr_gazetteer);
        store.set_lr(Group::Fusion, config.lr_classifier);
        store.set_lr(Group::Classifier, config.lr_classifier);
        Ok(Self {
            config: config.clone(),
            embedding,
            encoder,
            gaz_dense,
            gaz_rnn,
            proj_gaz,
            proj_enc,
            lambda,
            head,
            crf_mask: config.crf_bio_mask.then(|| bio_mask(-1e4)),
        })
    }

    fn head_input_width(config: &TrainConfig) -> usize {
        match (config.uses_gazetteer(), config.fusion_mode) {
            (false, _) | (true, FusionMode::WeightedSum) => config.hidden,
            (true, FusionMode::Concat) => 2 * config.hidden,
        }
    }

    fn crf_params(&self, store: &ParamStore) -> Option<CrfParams> {
        let HeadParams::Crf {
            transitions,
            start,
            end,
            ..
        } = self.head
        else {
            return None;
        };
        let mut p = CrfParams {
            transitions: store.value(transitions).clone(),
            start: store.value(start).row(0).to_owned(),
            end: store.value(end).row(0).to_owned(),
        };
        if let Some(mask) = &self.crf_mask {
            p.transitions += &mask.transitions;
            p.start += &mask.start;
            p.end += &mask.end;
        }
        Some(p)
    }

    fn gaz_forward(&self, store: &ParamStore, features: &Array2<f64>) -> Result<GazPass> {
        let pre = self.gaz_dense.forward(store, features)?;
        let cache = self.gaz_rnn.forward(store, &pre)?;
        Ok(GazPass { pre, cache })
    }

    fn gaz_backward(&self, store: &mut ParamStore, features: &Array2<f64>, pass: &GazPass, d_out: &Array2<f64>) {
        let d_pre = self.gaz_rnn.backward(store, &pass.pre, &pass.cache, d_out);
        self.gaz_dense.backward(store, features, &d_pre);
    }

    /// Gazetteer representation of a feature matrix (`N × D`).
    pub fn gazetteer_representation(&self, store: &ParamStore, features: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.gaz_forward(store, features)?.cache.output)
    }

    /// Encoder output `s` (`N × D`).
    pub fn encode(&self, store: &ParamStore, ids: &[usize]) -> Result<Array2<f64>> {
        let emb = self.embedding.forward(store, ids);
        Ok(self.encoder.forward(store, &emb)?.output)
    }

    /// Projected tag-space logits `(g_t, s_t)` of the gold-feature gazetteer
    /// branch and the encoder.
    pub fn adaptation_logits(&self, store: &ParamStore, ex: &Example) -> Result<(Array2<f64>, Array2<f64>)> {
        let g_r = self.gazetteer_representation(store, &ex.gold_features)?;
        let s = self.encode(store, &ex.ids)?;
        Ok((self.proj_gaz.forward(store, &g_r)?, self.proj_enc.forward(store, &s)?))
    }

    /// Loss of one example; when `backward`, gradients scaled by `scale` are
    /// accumulated into `store`. `rng` enables dropout.
    #[allow(clippy::too_many_arguments)]
    pub fn example_loss(
        &self,
        store: &mut ParamStore,
        ex: &Example,
        stage: Stage,
        mut rng: Option<&mut ChaCha8Rng>,
        backward: bool,
        scale: f64,
        terms: TermMask,
    ) -> Result<LossBreakdown> {
        let cfg = &self.config;
        let n = ex.ts.num_subwords();
        let emb = self.embedding.forward(store, &ex.ids);
        let enc = self.encoder.forward(store, &emb)?;
        let s = &enc.output;
        let mut d_s = Array2::<f64>::zeros(s.raw_dim());
        let mut out = LossBreakdown::default();

        // Adaptation terms against gold-tag gazetteer features.
        let kl_weight = match stage {
            Stage::One => 1.0,
            Stage::Two => cfg.effective_alpha(),
        };
        if cfg.uses_gazetteer() {
            let gold = self.gaz_forward(store, &ex.gold_features)?;
            let g_t = self.proj_gaz.forward(store, &gold.cache.output)?;
            let s_t = self.proj_enc.forward(store, s)?;
            let into_s = kl_stopgrad(&g_t, &s_t)?;
            let into_g = kl_stopgrad(&s_t, &g_t)?;
            out.l1 = into_s.value + into_g.value;
            let mut d_s_t = into_s.d_q;
            let mut d_g_t = into_g.d_q;
            if !ex.entity_rows.is_empty() {
                let ge = gather_rows(&g_t, &ex.entity_rows);
                let se = gather_rows(&s_t, &ex.entity_rows);
                let e_into_s = kl_stopgrad(&ge, &se)?;
                let e_into_g = kl_stopgrad(&se, &ge)?;
                out.l2 = e_into_s.value + e_into_g.value;
                scatter_add_rows(&mut d_s_t, &ex.entity_rows, &e_into_s.d_q);
                scatter_add_rows(&mut d_g_t, &ex.entity_rows, &e_into_g.d_q);
            }
            if backward && kl_weight != 0.0 {
                let k = kl_weight * scale;
                if terms.kl_into_encoder {
                    let d = self.proj_enc.backward(store, s, &(d_s_t * k));
                    if stage == Stage::Two {
                        d_s += &d;
                    }
                }
                if terms.kl_into_gazetteer {
                    let d_g_r = self.proj_gaz.backward(store, &gold.cache.output, &(d_g_t * k));
                    self.gaz_backward(store, &ex.gold_features, &gold, &d_g_r);
                }
            }
        }

        if stage == Stage::One {
            out.l4 = out.l1 + out.l2;
            return Ok(out);
        }

        // Supervised path on matched features.
        let mask_s = rng
            .as_deref_mut()
            .filter(|_| cfg.dropout > 0.0)
            .map(|r| dropout_mask(n, cfg.hidden, cfg.dropout, r));
        let s_d = match &mask_s {
            Some(m) => s * m,
            None => s.clone(),
        };
        let matched = if cfg.uses_gazetteer() {
            Some(self.gaz_forward(store, &ex.match_features)?)
        } else {
            None
        };
        let lambda = self.lambda.map(|id| store.value(id).clone());
        let fused = match &matched {
            Some(m) => fuse(&s_d, &m.cache.output, cfg.fusion_mode, lambda.as_ref())?,
            None => s_d.clone(),
        };
        let mask_f = rng
            .as_mut()
            .filter(|_| cfg.dropout > 0.0)
            .map(|r| dropout_mask(n, fused.ncols(), cfg.dropout, r));
        let f_d = match &mask_f {
            Some(m) => &fused * m,
            None => fused.clone(),
        };
        let first = &ex.ts.first_subword_of_word;
        let h = gather_rows(&f_d, first);
        let (l3, d_h) = self.head_loss(store, &h, ex, backward && terms.supervised, scale)?;
        out.l3 = l3;
        out.l4 = cfg.effective_alpha() * (out.l1 + out.l2) + out.l3;

        if backward && terms.supervised {
            let mut d_f = Array2::zeros(f_d.raw_dim());
            scatter_add_rows(&mut d_f, first, &d_h);
            if let Some(m) = &mask_f {
                d_f *= m;
            }
            let mut d_s_d = match &matched {
                Some(m) => {
                    let (ds, dg, dl) = fuse_backward(&s_d, &m.cache.output, cfg.fusion_mode, lambda.as_ref(), &d_f);
                    if let (Some(id), Some(dl)) = (self.lambda, dl) {
                        *store.grad_mut(id) += &dl;
                    }
                    self.gaz_backward(store, &ex.match_features, m, &dg);
                    ds
                }
                None => d_f,
            };
            if let Some(m) = &mask_s {
                d_s_d *= m;
            }
            d_s += &d_s_d;
        }

        if backward {
            let d_emb = self.encoder.backward(store, &emb, &enc, &d_s);
            self.embedding.backward(store, &ex.ids, &d_emb);
        }
        Ok(out)
    }

    /// Head loss on word rows `h`; returns the loss and `d_h` (already scaled).
    fn head_loss(
        &self,
        store: &mut ParamStore,
        h: &Array2<f64>,
        ex: &Example,
        backward: bool,
        scale: f64,
    ) -> Result<(f64, Array2<f64>)> {
        let gold: Vec<usize> = ex.sentence.tags.iter().map(|t| t.0).collect();
        match self.head {
            HeadParams::Softmax { out } => {
                let em = out.forward(store, h)?;
                let (loss, d_em) = cross_entropy(&em, &gold)?;
                let d_h = if backward {
                    out.backward(store, h, &(d_em * scale))
                } else {
                    Array2::zeros(h.raw_dim())
                };
                Ok((loss, d_h))
            }
            HeadParams::Crf {
                out,
                transitions,
                start,
                end,
            } => {
                let em = out.forward(store, h)?;
                let crf = self.crf_params(store).expect("crf head");
                let (loss, g) = crf_nll(&em, &crf, &gold)?;
                let d_h = if backward {
                    *store.grad_mut(transitions) += &(g.transitions * scale);
                    *store.grad_mut(start) += &(g.start * scale).insert_axis(Axis(0));
                    *store.grad_mut(end) += &(g.end * scale).insert_axis(Axis(0));
                    out.backward(store, h, &(g.emissions * scale))
                } else {
                    Array2::zeros(h.raw_dim())
                };
                Ok((loss, d_h))
            }
            HeadParams::Span { start, end } => {
                let ls = start.forward(store, h)?;
                let le = end.forward(store, h)?;
                let loss = span_loss(&ls, &le, &ex.entities)?;
                let d_h = if backward {
                    start.backward(store, h, &(loss.d_start * scale)) + end.backward(store, h, &(loss.d_end * scale))
                } else {
                    Array2::zeros(h.raw_dim())
                };
                Ok((loss.value, d_h))
            }
        }
    }

    /// Dropout-free forward pass producing head scores and decoded tags.
    pub fn predict_example(&self, store: &ParamStore, ex: &Example) -> Result<Prediction> {
        let s = self.encode(store, &ex.ids)?;
        let fused = if self.config.uses_gazetteer() {
            let g = self.gazetteer_representation(store, &ex.match_features)?;
            let lambda = self.lambda.map(|id| store.value(id).clone());
            fuse(&s, &g, self.config.fusion_mode, lambda.as_ref())?
        } else {
            s
        };
        let h = gather_rows(&fused, &ex.ts.first_subword_of_word);
        let (logits, tags) = match self.head {
            HeadParams::Softmax { out } => {
                let logits = HeadLogits::Softmax(out.forward(store, &h)?);
                let tags = logits.decode()?;
                (logits, tags)
            }
            HeadParams::Crf { out, .. } => {
                let em = out.forward(store, &h)?;
                let crf = self.crf_params(store).expect("crf head");
                let mut tags: Vec<Tag> = crf_viterbi(&em, &crf)?.into_iter().map(Tag).collect();
                repair_bio(&mut tags);
                (HeadLogits::Crf(em), tags)
            }
            HeadParams::Span { start, end } => {
                let ls = start.forward(store, &h)?;
                let le = end.forward(store, &h)?;
                let tags = entities_to_tags(&span_decode(&ls, &le), h.nrows());
                (HeadLogits::Span { start: ls, end: le }, tags)
            }
        };
        Ok(Prediction { logits, tags })
    }
}

/// Precompute subwords, ids and both feature matrices for a sentence.
pub fn prepare_example(
    s: &Sentence,
    vocab: &Vocab,
    tree: &SearchTree,
    config: &TrainConfig,
) -> Result<Example> {
    let ts = subword_tokenize(s, config.subword)?;
    let mut unknown = 0;
    let ids = ts
        .subwords
        .iter()
        .map(|w| {
            vocab.id(w).unwrap_or_else(|| {
                unknown += 1;
                0
            })
        })
        .collect();
    let gold_features = gold_tag_features(s, &ts)?;
    let matches = match_sentence(tree, &s.tokens);
    let match_features = align_to_subwords(&featurize(&matches, s.len()), &ts)?;
    let entity_rows = entity_row_indices(s, &ts);
    Ok(Example {
        entities: s.entities(),
        sentence: s.clone(),
        ts,
        ids,
        unknown,
        gold_features,
        match_features,
        entity_rows,
    })
}
