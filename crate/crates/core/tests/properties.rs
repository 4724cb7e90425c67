use ndarray::Array2;
use proptest::prelude::*;

use scdag_core::corpus::{
    emit_conll, entities_to_tags, extract_entities, first_bio_violation, parse_conll, repair_bio, Entity, Sentence,
};
use scdag_core::ensemble::{average_logits, token_vote, HeadLogits};
use scdag_core::gazetteer::{build_statistical, coverage_rate, Gazetteer, Surface, TypeRecord};
use scdag_core::matcher::{build_tree, featurize, match_sentence};
use scdag_core::nn::{kl_divergence, log_softmax, row_softmax};
use scdag_core::taxonomy::{FineLabel, Tag, NUM_FINE, NUM_TAGS};

fn tag() -> impl Strategy<Value = Tag> {
    (0..NUM_TAGS).prop_map(Tag)
}

fn valid_tags(max: usize) -> impl Strategy<Value = Vec<Tag>> {
    prop::collection::vec(tag(), 0..max).prop_map(|mut t| {
        repair_bio(&mut t);
        t
    })
}

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,3}"
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-5.0f64..5.0, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

/// Independent scan over valid BIO: `B` opens an entity, `I` extends the last one.
fn naive_entities(tags: &[Tag]) -> Vec<Entity> {
    let mut out: Vec<Entity> = Vec::new();
    for (i, t) in tags.iter().enumerate() {
        if t.is_begin() {
            out.push(Entity { start: i, end: i, label: t.label().unwrap() });
        } else if t.is_inside() {
            let last = out.last_mut().expect("valid BIO");
            assert_eq!(last.end + 1, i);
            assert_eq!(Some(last.label), t.label());
            last.end = i;
        }
    }
    out
}

proptest! {
    #[test]
    fn repair_makes_valid_and_is_idempotent(mut tags in prop::collection::vec(tag(), 0..20)) {
        repair_bio(&mut tags);
        prop_assert_eq!(first_bio_violation(&tags), None);
        let before = tags.clone();
        prop_assert!(!repair_bio(&mut tags));
        prop_assert_eq!(tags, before);
    }

    #[test]
    fn extraction_matches_naive_scan(tags in valid_tags(25)) {
        let e = extract_entities(&tags);
        prop_assert_eq!(&e, &naive_entities(&tags));
        prop_assert_eq!(entities_to_tags(&e, tags.len()), tags);
    }

    #[test]
    fn conll_round_trip(
        blocks in prop::collection::vec(
            (1usize..8).prop_flat_map(|n| (prop::collection::vec(word(), n), valid_tags(n + 1).prop_map(move |mut t| { t.resize(n, Tag::O); repair_bio(&mut t); t }))),
            0..6,
        ),
        named in any::<bool>(),
    ) {
        let sentences: Vec<Sentence> = blocks
            .into_iter()
            .enumerate()
            .map(|(i, (tokens, tags))| {
                let id = if named { format!("doc-{i}") } else { format!("sent-{i}") };
                Sentence::new(id, tokens, tags).unwrap()
            })
            .collect();
        let text = emit_conll(&sentences);
        prop_assert_eq!(parse_conll(&text).unwrap(), sentences);
    }

    #[test]
    fn matcher_agrees_with_brute_force(
        entries in prop::collection::vec((prop::collection::vec("[ab]", 1..4), 0..4usize), 0..8),
        words in prop::collection::vec("[abAB]", 0..12),
    ) {
        let mut g = Gazetteer::new();
        for (surface, l) in &entries {
            g.insert(FineLabel(*l), surface.clone());
        }
        let mut got = match_sentence(&build_tree(&g), &words);
        got.sort_by_key(|m| (m.start, m.end, m.label));
        let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        let mut want = Vec::new();
        for label in FineLabel::all() {
            for s in 0..lower.len() {
                if let Some(e) = (s..lower.len()).filter(|&e| g.contains(label, &lower[s..=e])).max() {
                    want.push((s, e, label));
                }
            }
        }
        want.sort();
        let got: Vec<_> = got.iter().map(|m| (m.start, m.end, m.label)).collect();
        prop_assert_eq!(got, want);

        let f = featurize(&match_sentence(&build_tree(&g), &words), words.len());
        for row in f.rows() {
            prop_assert!(row.iter().all(|v| *v == 0.0 || *v == 1.0));
            prop_assert_eq!(row[0] == 1.0, row.iter().skip(1).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn gazetteer_tsv_round_trip(entries in prop::collection::vec((prop::collection::vec(word(), 1..4), 0..NUM_FINE), 0..20)) {
        let mut g = Gazetteer::new();
        for (s, l) in entries {
            g.insert(FineLabel(l), s);
        }
        let mut buf = Vec::new();
        g.save(&mut buf).unwrap();
        prop_assert_eq!(Gazetteer::load(&buf[..]).unwrap(), g);
    }

    #[test]
    fn statistical_build_invariants(
        records in prop::collection::vec((prop::collection::vec("[a-d]", 1..3), 0..3usize), 1..12),
        labels in prop::collection::vec(prop::sample::select(vec!["Food", "Drink", "Artist"]), 12),
    ) {
        let records: Vec<TypeRecord> = records
            .into_iter()
            .map(|(s, t)| TypeRecord { surface: s, source_type: format!("T{t}") })
            .collect();
        let reference: Vec<Sentence> = records
            .iter()
            .zip(&labels)
            .map(|(r, l)| {
                let n = r.surface.len();
                let tags: Vec<String> = (0..n).map(|k| format!("{}-{l}", if k == 0 { "B" } else { "I" })).collect();
                let tags: Vec<&str> = tags.iter().map(String::as_str).collect();
                Sentence::from_strs("x", &r.surface.join(" "), &tags).unwrap()
            })
            .collect();
        let surfaces: Vec<&Surface> = records.iter().map(|r| &r.surface).collect();
        let mut prev = 0.0;
        for k in 1..=3 {
            let g = build_statistical(&records, &reference, k).unwrap();
            for (_, s) in g.iter() {
                prop_assert!(surfaces.contains(&s));
            }
            let rate = coverage_rate(&g, &reference).label_match;
            prop_assert!(rate >= prev);
            prev = rate;
        }
    }

    #[test]
    fn softmax_and_kl(p in matrix(3, 6), q in matrix(3, 6)) {
        let sm = row_softmax(&p);
        for row in sm.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let ls = log_softmax(&p);
        prop_assert!(ls.iter().all(|v| *v <= 1e-15));
        prop_assert!(kl_divergence(&p, &q).unwrap().value >= -1e-12);
        prop_assert!(kl_divergence(&p, &p).unwrap().value.abs() < 1e-12);
        let shifted = &p + 7.5;
        prop_assert!((kl_divergence(&shifted, &q).unwrap().value - kl_divergence(&p, &q).unwrap().value).abs() < 1e-9);
    }

    #[test]
    fn ensemble_properties(a in matrix(4, NUM_TAGS), b in matrix(4, NUM_TAGS), c in matrix(4, NUM_TAGS), tags in valid_tags(8)) {
        let runs = [HeadLogits::Softmax(a.clone()), HeadLogits::Softmax(b), HeadLogits::Softmax(c)];
        let fwd = average_logits(&runs).unwrap();
        let rev: Vec<_> = runs.iter().rev().cloned().collect();
        let HeadLogits::Softmax(x) = fwd else { unreachable!() };
        let HeadLogits::Softmax(y) = average_logits(&rev).unwrap() else { unreachable!() };
        prop_assert!((x - y).iter().all(|d| d.abs() < 1e-12));
        let same = [HeadLogits::Softmax(a.clone()), HeadLogits::Softmax(a.clone())];
        prop_assert_eq!(average_logits(&same).unwrap(), HeadLogits::Softmax(a));
        prop_assert_eq!(token_vote(std::slice::from_ref(&tags), &[0.7]).unwrap(), tags);
    }
}
