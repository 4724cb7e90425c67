use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heads::HeadKind;
use crate::subword::SubwordMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// `[s | g]` per token, width `2D`.
    Concat,
    /// `σ(λ)⊙s + (1-σ(λ))⊙g` with a trainable `λ ∈ R^D`.
    WeightedSum,
}

/// Which training recipe to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Two-stage dual adaptation followed by the multitask objective.
    Scdag,
    /// Gazetteer fusion trained on the supervised loss only.
    Integration,
    /// Encoder and head only; no gazetteer branch.
    Base,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the adaptation losses in stage 2; `None` picks the
    /// per-head default (5 for softmax/span, 100 for CRF).
    pub alpha: Option<f64>,
    pub lr_encoder: f64,
    pub lr_gazetteer: f64,
    pub lr_classifier: f64,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub fusion_mode: FusionMode,
    pub classifier: HeadKind,
    pub variant: Variant,
    pub seed: u64,
    /// Width `D` of the encoder and gazetteer-network outputs (even).
    pub hidden: usize,
    pub weight_decay: f64,
    pub max_grad_norm: Option<f64>,
    pub subword: SubwordMode,
    /// Add a hard penalty on BIO-invalid CRF transitions.
    pub crf_bio_mask: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            lr_encoder: 1e-3,
            lr_gazetteer: 1e-2,
            lr_classifier: 1e-3,
            epochs_stage1: 5,
            epochs_stage2: 20,
            batch_size: 8,
            dropout: 0.1,
            fusion_mode: FusionMode::Concat,
            classifier: HeadKind::Crf,
            variant: Variant::Scdag,
            seed: 0,
            hidden: 64,
            weight_decay: 0.01,
            max_grad_norm: None,
            subword: SubwordMode::Identity,
            crf_bio_mask: false,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 17] = [
        "alpha",
        "lr_encoder",
        "lr_gazetteer",
        "lr_classifier",
        "epochs_stage1",
        "epochs_stage2",
        "batch_size",
        "dropout",
        "fusion_mode",
        "classifier",
        "variant",
        "seed",
        "hidden",
        "weight_decay",
        "max_grad_norm",
        "subword",
        "crf_bio_mask",
    ];

    /// Settings at the scale of a pretrained large transformer encoder.
    pub fn large_scale(classifier: HeadKind) -> Self {
        Self {
            lr_encoder: 2e-5,
            lr_gazetteer: 2e-4,
            lr_classifier: 2e-5,
            batch_size: 32,
            hidden: 1024,
            classifier,
            ..Self::default()
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(match self.classifier {
            HeadKind::Crf => 100.0,
            HeadKind::Softmax | HeadKind::Span => 5.0,
        })
    }

    /// Adaptation weight actually applied in stage 2.
    pub fn effective_alpha(&self) -> f64 {
        match self.variant {
            Variant::Scdag => self.alpha(),
            Variant::Integration | Variant::Base => 0.0,
        }
    }

    pub fn uses_gazetteer(&self) -> bool {
        self.variant != Variant::Base
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.alpha() < 0.0 || !self.alpha().is_finite() {
            return bad(format!("alpha must be >= 0, got {}", self.alpha()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.hidden < 2 || !self.hidden.is_multiple_of(2) {
            return bad(format!("hidden must be an even number >= 2, got {}", self.hidden));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        for (name, lr) in [
            ("lr_encoder", self.lr_encoder),
            ("lr_gazetteer", self.lr_gazetteer),
            ("lr_classifier", self.lr_classifier),
        ] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be a finite nonnegative number"));
            }
        }
        if let SubwordMode::FixedChunk(0) = self.subword {
            return bad("subword chunk size must be >= 1".into());
        }
        Ok(())
    }

    /// Build from a JSON object, rejecting unknown keys with the list of valid ones.
    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        if let Some(obj) = value.as_object() {
            if let Some(k) = obj.keys().find(|k| !Self::KEYS.contains(&k.as_str())) {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key `{k}`; valid keys: {}",
                    Self::KEYS.join(", ")
                )));
            }
        } else {
            return Err(Error::InvalidArgument("config must be a key-value table".into()));
        }
        let cfg: Self = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
