//! Entity-replacement augmentation and template slotting.
//!
//! Both draw replacement surfaces uniformly from the same-label gazetteer
//! bucket (iterated in sorted order, so a seed fully determines the output).

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Entity, Sentence};
use crate::error::{Error, Result};
use crate::gazetteer::{Gazetteer, Surface};
use crate::taxonomy::{FineLabel, Tag};

#[derive(Debug, Clone, Default)]
pub struct AugmentOutput {
    pub sentences: Vec<Sentence>,
    /// Entities (or templates) left untouched because their bucket was empty.
    pub warnings: usize,
}

fn draw<'a>(g: &'a Gazetteer, label: FineLabel, rng: &mut ChaCha8Rng) -> Option<&'a Surface> {
    let bucket = g.bucket(label).filter(|b| !b.is_empty())?;
    let i = rng.random_range(0..bucket.len());
    bucket.iter().nth(i)
}

fn push_entity(tokens: &mut Vec<String>, tags: &mut Vec<Tag>, surface: &[String], label: FineLabel) {
    for (k, tok) in surface.iter().enumerate() {
        tokens.push(tok.clone());
        tags.push(if k == 0 {
            Tag::begin(label)
        } else {
            Tag::inside(label)
        });
    }
}

/// Replace each gold entity, with probability `rate`, by a random
/// same-label gazetteer surface.
pub fn entity_replace_augment(
    sentences: &[Sentence],
    g: &Gazetteer,
    rate: f64,
    seed: u64,
) -> Result<AugmentOutput> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("rate {rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = AugmentOutput::default();
    for s in sentences {
        let entities = s.entities();
        let mut tokens = Vec::with_capacity(s.len());
        let mut tags = Vec::with_capacity(s.len());
        let mut cursor = 0;
        for Entity { start, end, label } in entities {
            tokens.extend_from_slice(&s.tokens[cursor..start]);
            tags.extend_from_slice(&s.tags[cursor..start]);
            cursor = end + 1;
            let replace = rng.random::<f64>() < rate;
            let surface = if replace { draw(g, label, &mut rng) } else { None };
            match surface {
                Some(surface) => push_entity(&mut tokens, &mut tags, surface, label),
                None => {
                    if replace {
                        warn!("no gazetteer entries for {label}; entity in {} kept", s.id);
                        out.warnings += 1;
                    }
                    tokens.extend_from_slice(&s.tokens[start..=end]);
                    tags.extend_from_slice(&s.tags[start..=end]);
                }
            }
        }
        tokens.extend_from_slice(&s.tokens[cursor..]);
        tags.extend_from_slice(&s.tags[cursor..]);
        out.sentences.push(Sentence {
            id: s.id.clone(),
            tokens,
            tags,
        });
    }
    Ok(out)
}

/// If `token` is a slot marker `[Label]`, return the label.
pub fn slot_label(token: &str) -> Option<FineLabel> {
    let inner = token.strip_prefix('[')?.strip_suffix(']')?;
    FineLabel::from_name(inner).ok()
}

/// Fill every `[Label]` slot of every template with a drawn gazetteer surface.
pub fn slot_templates(templates: &[Sentence], g: &Gazetteer, seed: u64) -> AugmentOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = AugmentOutput::default();
    'templates: for t in templates {
        let mut tokens = Vec::with_capacity(t.len());
        let mut tags = Vec::with_capacity(t.len());
        for (tok, &tag) in t.tokens.iter().zip(&t.tags) {
            match slot_label(tok) {
                Some(label) => match draw(g, label, &mut rng) {
                    Some(surface) => push_entity(&mut tokens, &mut tags, surface, label),
                    None => {
                        warn!("no gazetteer entries for {label}; template {} skipped", t.id);
                        out.warnings += 1;
                        continue 'templates;
                    }
                },
                None => {
                    tokens.push(tok.clone());
                    tags.push(tag);
                }
            }
        }
        out.sentences.push(Sentence {
            id: t.id.clone(),
            tokens,
            tags,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_conll;
    use crate::gazetteer::surface_from_str;

    fn l(name: &str) -> FineLabel {
        FineLabel::from_name(name).unwrap()
    }

    fn corpus() -> Vec<Sentence> {
        parse_conll("i O\nlike O\ncola B-Drink\n\nbuy O\napple B-Food\npie I-Food\nnow O\n").unwrap()
    }

    #[test]
    fn rate_zero_is_identity() {
        let mut g = Gazetteer::new();
        g.insert(l("Drink"), surface_from_str("green tea"));
        let out = entity_replace_augment(&corpus(), &g, 0.0, 7).unwrap();
        assert_eq!(out.sentences, corpus());
        assert!(entity_replace_augment(&corpus(), &g, 1.5, 7).is_err());
    }

    #[test]
    fn rate_one_single_outcome() {
        let mut g = Gazetteer::new();
        g.insert(l("Drink"), surface_from_str("green tea"));
        let out = entity_replace_augment(&corpus()[..1], &g, 1.0, 1).unwrap();
        let s = &out.sentences[0];
        assert_eq!(s.tokens, vec!["i", "like", "green", "tea"]);
        assert_eq!(s.tags[2], Tag::begin(l("Drink")));
        assert_eq!(s.tags[3], Tag::inside(l("Drink")));
        assert_eq!(out.warnings, 0);
    }

    #[test]
    fn empty_bucket_warns() {
        let mut g = Gazetteer::new();
        g.insert(l("Drink"), surface_from_str("tea"));
        let out = entity_replace_augment(&corpus(), &g, 1.0, 3).unwrap();
        assert_eq!(out.warnings, 1);
        assert_eq!(out.sentences[1], corpus()[1]);
    }

    #[test]
    fn deterministic() {
        let mut g = Gazetteer::new();
        for s in ["tea", "green tea", "milk", "cola zero"] {
            g.insert(l("Drink"), surface_from_str(s));
        }
        for s in ["pie", "rice cake"] {
            g.insert(l("Food"), surface_from_str(s));
        }
        let a = entity_replace_augment(&corpus(), &g, 0.5, 42).unwrap();
        let b = entity_replace_augment(&corpus(), &g, 0.5, 42).unwrap();
        assert_eq!(a.sentences, b.sentences);
    }

    #[test]
    fn slots() {
        let templates = parse_conll("where O\nto O\nbuy O\n[OtherPROD] B-OtherPROD\n").unwrap();
        let mut g = Gazetteer::new();
        g.insert(l("OtherPROD"), surface_from_str("iphone 14"));
        let out = slot_templates(&templates, &g, 0);
        let s = &out.sentences[0];
        assert_eq!(s.tokens.join(" "), "where to buy iphone 14");
        let names: Vec<String> = s.tags.iter().map(|t| t.name()).collect();
        assert_eq!(names, vec!["O", "O", "O", "B-OtherPROD", "I-OtherPROD"]);

        assert!(slot_templates(&[], &g, 0).sentences.is_empty());

        let skipped = slot_templates(&parse_conll("[Food] B-Food\n").unwrap(), &g, 0);
        assert!(skipped.sentences.is_empty());
        assert_eq!(skipped.warnings, 1);
    }

    #[test]
    fn two_slots_reproducible() {
        let templates = parse_conll("[Food] B-Food\nand O\n[Drink] B-Drink\n").unwrap();
        let mut g = Gazetteer::new();
        for s in ["pie", "rice cake", "bread"] {
            g.insert(l("Food"), surface_from_str(s));
        }
        for s in ["tea", "cola"] {
            g.insert(l("Drink"), surface_from_str(s));
        }
        let a = slot_templates(&templates, &g, 9);
        let b = slot_templates(&templates, &g, 9);
        assert_eq!(a.sentences, b.sentences);
        let s = &a.sentences[0];
        assert!(s.validate().is_ok());
        assert_eq!(s.entities().len(), 2);
    }
}
