//! Seeded synthetic corpora, gazetteers and ensembles for sanity runs and
//! benchmarks.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::Sentence;
use crate::ensemble::HeadLogits;
use crate::gazetteer::{Gazetteer, Surface, TypeRecord};
use crate::taxonomy::{FineLabel, Tag, NUM_TAGS};

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ra", "ten", "vu", "so", "pel", "dri", "an", "qui", "zo", "bar", "ne", "fi", "gor", "ul", "cha",
    "mo", "ris", "te", "wan", "ix", "deb",
];

const FILLER: [&str; 16] = [
    "i", "saw", "the", "new", "about", "we", "talked", "with", "near", "at", "yesterday", "and", "then", "really",
    "liked", "there",
];

fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("nonempty")).collect()
}

/// `n` distinct surfaces of one to `max_len` pseudo-words.
fn surfaces(rng: &mut ChaCha8Rng, n: usize, max_len: usize, taken: &mut BTreeSet<Surface>) -> Vec<Surface> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.random_range(1..=max_len);
        let s: Surface = (0..len).map(|_| word(rng)).collect();
        if taken.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

fn filler(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| FILLER.choose(rng).expect("nonempty").to_string()).collect()
}

fn push_entity(tokens: &mut Vec<String>, tags: &mut Vec<Tag>, surface: &[String], label: FineLabel) {
    for (k, t) in surface.iter().enumerate() {
        tokens.push(t.clone());
        tags.push(if k == 0 { Tag::begin(label) } else { Tag::inside(label) });
    }
}

/// A sentence built from `(context, entity)` pieces followed by filler.
fn compose(id: String, pieces: &[(Vec<String>, Surface, FineLabel)], tail: Vec<String>) -> Sentence {
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for (ctx, surface, label) in pieces {
        tags.extend(std::iter::repeat_n(Tag::O, ctx.len()));
        tokens.extend(ctx.iter().cloned());
        push_entity(&mut tokens, &mut tags, surface, *label);
    }
    tags.extend(std::iter::repeat_n(Tag::O, tail.len()));
    tokens.extend(tail);
    Sentence::new(id, tokens, tags).expect("generated BIO is valid")
}

fn labels(names: &[&str]) -> Vec<FineLabel> {
    names.iter().map(|n| FineLabel::from_name(n).expect("known label")).collect()
}

/// The eight fine labels used by [`overfit_corpus`].
pub fn overfit_labels() -> Vec<FineLabel> {
    labels(&[
        "Facility",
        "VisualWork",
        "MusicalGRP",
        "Artist",
        "Food",
        "Drink",
        "Disease",
        "HumanSettlement",
    ])
}

/// A generated corpus with its gazetteer.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub gazetteer: Gazetteer,
}

/// 50 sentences over 8 labels with a fully covering gazetteer; `dev` equals
/// `train`.
pub fn overfit_corpus(seed: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = overfit_labels();
    let mut taken = BTreeSet::new();
    let lexicon: Vec<Vec<Surface>> = labels.iter().map(|_| surfaces(&mut rng, 6, 2, &mut taken)).collect();
    let mut gazetteer = Gazetteer::new();
    for (l, bucket) in labels.iter().zip(&lexicon) {
        for s in bucket {
            gazetteer.insert(*l, s.clone());
        }
    }
    let train: Vec<Sentence> = (0..50)
        .map(|i| {
            let n_ent = 1 + i % 2;
            let pieces: Vec<_> = (0..n_ent)
                .map(|k| {
                    let li = (i + 3 * k) % labels.len();
                    let ctx_len = rng.random_range(1..=3);
                    (filler(&mut rng, ctx_len), lexicon[li].choose(&mut rng).unwrap().clone(), labels[li])
                })
                .collect();
            let tail_len = rng.random_range(0..=2);
            compose(format!("overfit-{i}"), &pieces, filler(&mut rng, tail_len))
        })
        .collect();
    SynthCorpus {
        dev: train.clone(),
        train,
        gazetteer,
    }
}

/// Settings of [`benchmark_corpus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub train: usize,
    pub dev: usize,
    pub surfaces_per_label: usize,
    /// Fraction of entity surfaces listed in the gazetteer.
    pub coverage: f64,
    /// Probability that a dev entity is drawn from surfaces unseen in train.
    pub unseen_dev: f64,
    /// Probability that an entity's left context is specific to its label.
    pub cue_rate: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            train: 400,
            dev: 100,
            surfaces_per_label: 40,
            coverage: 0.6,
            unseen_dev: 0.5,
            cue_rate: 0.5,
        }
    }
}

/// Six labels in three confusable pairs.
pub fn benchmark_labels() -> Vec<FineLabel> {
    labels(&["Food", "Drink", "Artist", "Athlete", "Disease", "Symptom"])
}

/// A corpus whose labels are often only recoverable from the gazetteer:
/// half of the contexts carry a label cue, the rest are shared, and part of
/// the dev surfaces never occur in training.
pub fn benchmark_corpus(spec: BenchmarkSpec, seed: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = benchmark_labels();
    let mut taken = BTreeSet::new();
    let lexicon: Vec<Vec<Surface>> = labels
        .iter()
        .map(|_| surfaces(&mut rng, spec.surfaces_per_label, 3, &mut taken))
        .collect();
    let cues: Vec<Vec<String>> = labels.iter().map(|_| vec![word(&mut rng), word(&mut rng)]).collect();
    let seen_cut = spec.surfaces_per_label / 2;

    let mut gazetteer = Gazetteer::new();
    for (l, bucket) in labels.iter().zip(&lexicon) {
        for s in bucket {
            if rng.random_bool(spec.coverage) {
                gazetteer.insert(*l, s.clone());
            }
        }
    }

    let sentence = |id: String, rng: &mut ChaCha8Rng, dev: bool| {
        let n_ent = rng.random_range(1..=2);
        let pieces: Vec<_> = (0..n_ent)
            .map(|_| {
                let li = rng.random_range(0..labels.len());
                let pool = if dev && rng.random_bool(spec.unseen_dev) {
                    &lexicon[li][seen_cut..]
                } else {
                    &lexicon[li][..seen_cut]
                };
                let ctx_len = rng.random_range(0..=2);
                let mut ctx = filler(rng, ctx_len);
                if rng.random_bool(spec.cue_rate) {
                    ctx.push(cues[li].choose(rng).unwrap().clone());
                } else {
                    ctx.push(FILLER.choose(rng).unwrap().to_string());
                }
                (ctx, pool.choose(rng).unwrap().clone(), labels[li])
            })
            .collect();
        let tail_len = rng.random_range(0..=2);
        let tail = filler(rng, tail_len);
        compose(id, &pieces, tail)
    };
    let train = (0..spec.train).map(|i| sentence(format!("train-{i}"), &mut rng, false)).collect();
    let dev = (0..spec.dev).map(|i| sentence(format!("dev-{i}"), &mut rng, true)).collect();
    SynthCorpus { train, dev, gazetteer }
}

/// Knowledge-base dump and labelled reference corpus for gazetteer
/// construction.
#[derive(Debug, Clone)]
pub struct ConstructionFixture {
    pub records: Vec<TypeRecord>,
    pub reference: Vec<Sentence>,
}

/// Every source type splits its entities across two labels, so keeping the
/// top two labels per type covers strictly more than the argmax mapping.
pub fn construction_fixture(seed: u64) -> ConstructionFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types: [(&str, &str, &str); 4] = [
        ("Q_dish", "Food", "Drink"),
        ("Q_band", "MusicalGRP", "Artist"),
        ("Q_town", "HumanSettlement", "Facility"),
        ("Q_book", "WrittenWork", "VisualWork"),
    ];
    let mut taken = BTreeSet::new();
    let mut records = Vec::new();
    let mut reference = Vec::new();
    for (source, major, minor) in types {
        let (major, minor) = (FineLabel::from_name(major).unwrap(), FineLabel::from_name(minor).unwrap());
        for (k, s) in surfaces(&mut rng, 10, 2, &mut taken).into_iter().enumerate() {
            records.push(TypeRecord {
                surface: s.clone(),
                source_type: source.to_string(),
            });
            // 6 major, 4 minor
            let label = if k < 6 { major } else { minor };
            let ctx_len = rng.random_range(1..=3);
            reference.push(compose(
                format!("ref-{}", reference.len()),
                &[(filler(&mut rng, ctx_len), s, label)],
                filler(&mut rng, 1),
            ));
        }
    }
    // a type with no labelled occurrences
    for s in surfaces(&mut rng, 3, 1, &mut taken) {
        records.push(TypeRecord {
            surface: s,
            source_type: "Q_unused".into(),
        });
    }
    reference.shuffle(&mut rng);
    ConstructionFixture { records, reference }
}

/// Renders a dump as tab-separated `surface<TAB>type` lines.
pub fn dump_to_tsv(records: &[TypeRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{}\t{}\n", r.surface.join(" "), r.source_type))
        .collect()
}

/// Logits of one strong model and `copies` independently noised versions.
#[derive(Debug, Clone)]
pub struct NoisedEnsemble {
    pub gold: Vec<Sentence>,
    /// `runs[r][s]`: softmax logits of copy `r` on sentence `s`.
    pub runs: Vec<Vec<HeadLogits>>,
}

/// The strong model puts `margin` on the gold tag; each copy adds i.i.d.
/// Gaussian noise of standard deviation `noise`.
pub fn noised_ensemble(gold: &[Sentence], copies: usize, margin: f64, noise: f64, seed: u64) -> NoisedEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).expect("finite noise");
    let runs = (0..copies)
        .map(|_| {
            gold.iter()
                .map(|s| {
                    let mut m = Array2::from_shape_fn((s.len(), NUM_TAGS), |_| normal.sample(&mut rng));
                    for (i, t) in s.tags.iter().enumerate() {
                        m[[i, t.0]] += margin;
                    }
                    HeadLogits::Softmax(m)
                })
                .collect()
        })
        .collect();
    NoisedEnsemble {
        gold: gold.to_vec(),
        runs,
    }
}

/// Label histogram of a corpus's entities.
pub fn label_counts(sentences: &[Sentence]) -> BTreeMap<FineLabel, usize> {
    let mut out = BTreeMap::new();
    for s in sentences {
        for e in s.entities() {
            *out.entry(e.label).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overfit_shape() {
        let c = overfit_corpus(0);
        assert_eq!(c.train.len(), 50);
        assert_eq!(label_counts(&c.train).len(), 8);
        for s in &c.train {
            for e in s.entities() {
                assert!(c.gazetteer.contains(e.label, s.surface(&e)));
            }
        }
        assert_eq!(overfit_corpus(0).train, c.train);
    }

    #[test]
    fn benchmark_coverage_near_target() {
        let c = benchmark_corpus(BenchmarkSpec::default(), 3);
        assert_eq!((c.train.len(), c.dev.len()), (400, 100));
        let listed = c.gazetteer.len() as f64 / (6.0 * 40.0);
        assert!((listed - 0.6).abs() < 0.1, "{listed}");
    }

    #[test]
    fn ensemble_shapes() {
        let c = overfit_corpus(1);
        let e = noised_ensemble(&c.train[..3], 5, 2.0, 1.0, 7);
        assert_eq!(e.runs.len(), 5);
        assert_eq!(e.runs[0][1].num_words(), c.train[1].len());
    }
}
