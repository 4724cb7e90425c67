//! Tagging heads operating on word-level score matrices.

pub mod crf;
pub mod softmax;
pub mod span;

use serde::{Deserialize, Serialize};

pub use crf::{bio_mask, crf_nll, crf_viterbi, log_partition, CrfGrads, CrfParams};
pub use softmax::{softmax_decode, softmax_loss};
pub use span::{span_decode, span_loss, span_targets, SpanLoss, SPAN_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Softmax,
    Crf,
    Span,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::Softmax, HeadKind::Crf, HeadKind::Span];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Softmax => "softmax",
            HeadKind::Crf => "crf",
            HeadKind::Span => "span",
        }
    }
}

impl std::str::FromStr for HeadKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "softmax" => Ok(HeadKind::Softmax),
            "crf" => Ok(HeadKind::Crf),
            "span" => Ok(HeadKind::Span),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown classifier `{other}` (expected softmax, crf or span)"
            ))),
        }
    }
}
