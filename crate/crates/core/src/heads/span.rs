//! Start/end pointer head. Each word gets two independent 34-way labels:
//! class 0 is "not a boundary", class `1 + l` marks a boundary of fine label `l`.

use ndarray::Array2;

use super::softmax::argmax;
use crate::corpus::Entity;
use crate::error::{shape_err, Result};
use crate::nn::cross_entropy;
use crate::taxonomy::{FineLabel, NUM_FINE};

pub const SPAN_CLASSES: usize = NUM_FINE + 1;
pub const NO_BOUNDARY: usize = 0;

/// Per-word start and end classes for a set of gold entities.
pub fn span_targets(entities: &[Entity], len: usize) -> (Vec<usize>, Vec<usize>) {
    let mut starts = vec![NO_BOUNDARY; len];
    let mut ends = vec![NO_BOUNDARY; len];
    for e in entities {
        starts[e.start] = 1 + e.label.0;
        ends[e.end] = 1 + e.label.0;
    }
    (starts, ends)
}

#[derive(Debug, Clone)]
pub struct SpanLoss {
    pub value: f64,
    pub d_start: Array2<f64>,
    pub d_end: Array2<f64>,
}

/// Mean cross-entropy over start logits plus mean over end logits.
pub fn span_loss(start_logits: &Array2<f64>, end_logits: &Array2<f64>, gold: &[Entity]) -> Result<SpanLoss> {
    if start_logits.dim() != end_logits.dim() {
        return Err(shape_err(format!("{:?}", start_logits.dim()), format!("{:?}", end_logits.dim())));
    }
    let (starts, ends) = span_targets(gold, start_logits.nrows());
    let (ls, d_start) = cross_entropy(start_logits, &starts)?;
    let (le, d_end) = cross_entropy(end_logits, &ends)?;
    Ok(SpanLoss {
        value: ls + le,
        d_start,
        d_end,
    })
}

/// Greedy left-to-right pairing of each predicted start with the nearest
/// predicted end (at or after it) of the same label. Starts without an end
/// are dropped; spans never overlap.
pub fn span_decode(start_logits: &Array2<f64>, end_logits: &Array2<f64>) -> Vec<Entity> {
    let starts: Vec<usize> = start_logits.rows().into_iter().map(argmax).collect();
    let ends: Vec<usize> = end_logits.rows().into_iter().map(argmax).collect();
    decode_boundaries(&starts, &ends)
}

pub fn decode_boundaries(starts: &[usize], ends: &[usize]) -> Vec<Entity> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < starts.len() {
        let class = starts[i];
        if class != NO_BOUNDARY {
            if let Some(j) = (i..ends.len()).find(|&j| ends[j] == class) {
                out.push(Entity {
                    start: i,
                    end: j,
                    label: FineLabel(class - 1),
                });
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{entities_to_tags, first_bio_violation};

    fn l(name: &str) -> FineLabel {
        FineLabel::from_name(name).unwrap()
    }

    fn peaked(classes: &[usize]) -> Array2<f64> {
        let mut m = Array2::zeros((classes.len(), SPAN_CLASSES));
        for (i, &c) in classes.iter().enumerate() {
            m[[i, c]] = 12.0;
        }
        m
    }

    #[test]
    fn targets_for_table2() {
        let e = Entity { start: 3, end: 5, label: l("OtherPROD") };
        let (s, en) = span_targets(&[e], 6);
        let c = 1 + l("OtherPROD").0;
        assert_eq!(s, vec![0, 0, 0, c, 0, 0]);
        assert_eq!(en, vec![0, 0, 0, 0, 0, c]);
    }

    #[test]
    fn perfect_logits_decode_gold() {
        let gold = vec![
            Entity { start: 0, end: 0, label: l("Food") },
            Entity { start: 2, end: 4, label: l("OtherPROD") },
        ];
        let (s, e) = span_targets(&gold, 6);
        assert_eq!(span_decode(&peaked(&s), &peaked(&e)), gold);
        let loss = span_loss(&peaked(&s), &peaked(&e), &gold).unwrap();
        assert!(loss.value < 0.01);
    }

    #[test]
    fn unmatched_start_dropped() {
        let food = 1 + l("Food").0;
        let drink = 1 + l("Drink").0;
        let out = decode_boundaries(&[food, 0, 0], &[0, drink, 0]);
        assert!(out.is_empty());
        // start at 0 with end at 2; start at 1 lies inside and is skipped
        let out = decode_boundaries(&[food, food, 0], &[0, 0, food]);
        assert_eq!(out, vec![Entity { start: 0, end: 2, label: l("Food") }]);
        assert_eq!(first_bio_violation(&entities_to_tags(&out, 3)), None);
    }
}
