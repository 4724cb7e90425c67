use ndarray::Array2;

use crate::corpus::repair_bio;
use crate::error::Result;
use crate::nn::cross_entropy;
use crate::taxonomy::Tag;

/// Mean per-token cross-entropy and its gradient w.r.t. the emissions.
pub fn softmax_loss(emissions: &Array2<f64>, gold: &[Tag]) -> Result<(f64, Array2<f64>)> {
    let targets: Vec<usize> = gold.iter().map(|t| t.0).collect();
    cross_entropy(emissions, &targets)
}

/// Index of the row maximum; the lowest index wins ties.
pub fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-token argmax followed by BIO repair.
pub fn softmax_decode(emissions: &Array2<f64>) -> Vec<Tag> {
    let mut tags: Vec<Tag> = emissions.rows().into_iter().map(|r| Tag(argmax(r))).collect();
    repair_bio(&mut tags);
    tags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{first_bio_violation, Sentence};
    use crate::taxonomy::NUM_TAGS;

    fn peaked(tags: &[Tag], scale: f64) -> Array2<f64> {
        let mut e = Array2::zeros((tags.len(), NUM_TAGS));
        for (i, t) in tags.iter().enumerate() {
            e[[i, t.0]] = scale;
        }
        e
    }

    fn table2() -> Sentence {
        Sentence::from_strs(
            "t",
            "where to buy apple iphone 14",
            &["O", "O", "O", "B-OtherPROD", "I-OtherPROD", "I-OtherPROD"],
        )
        .unwrap()
    }

    #[test]
    fn peaked_loss_vanishes() {
        let s = table2();
        let (loss, _) = softmax_loss(&peaked(&s.tags, 20.0), &s.tags).unwrap();
        assert!(loss < 1e-6, "{loss}");
    }

    #[test]
    fn uniform_loss_is_log_k() {
        let s = table2();
        let (loss, _) = softmax_loss(&Array2::zeros((6, NUM_TAGS)), &s.tags).unwrap();
        assert!((loss - 67f64.ln()).abs() < 1e-12);
        assert!((loss - 4.2047).abs() < 1e-4);
    }

    #[test]
    fn decode_gold_and_repair() {
        let s = table2();
        assert_eq!(softmax_decode(&peaked(&s.tags, 5.0)), s.tags);
        let broken = vec![Tag::O, Tag(4), Tag(4)];
        let out = softmax_decode(&peaked(&broken, 5.0));
        assert_eq!(out, vec![Tag::O, Tag(3), Tag(4)]);
        assert_eq!(first_bio_violation(&out), None);
    }
}
