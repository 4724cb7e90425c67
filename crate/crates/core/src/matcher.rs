//! Token-level prefix tree over gazetteer surfaces, longest-match search and
//! BIO feature construction.
//!
//! Matching keeps, for every start position and every label, the single
//! longest surface of that label beginning there. Different labels (and
//! different starts) may overlap freely; featurization ORs them together.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::gazetteer::Gazetteer;
use crate::subword::TokenizedSentence;
use crate::taxonomy::{FineLabel, Tag, NUM_FINE, NUM_TAGS};

#[derive(Debug, Clone, Default)]
struct Node {
    children: HashMap<String, usize>,
    /// Labels for which the root→node path is a complete surface, sorted.
    labels: Vec<FineLabel>,
}

/// Immutable prefix tree over token sequences.
#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Match {
    pub start: usize,
    pub end: usize,
    pub label: FineLabel,
}

impl SearchTree {
    pub fn build(g: &Gazetteer) -> Self {
        let mut nodes = vec![Node::default()];
        for (label, surface) in g.iter() {
            let mut cur = 0;
            for tok in surface {
                cur = match nodes[cur].children.get(tok) {
                    Some(&next) => next,
                    None => {
                        nodes.push(Node::default());
                        let next = nodes.len() - 1;
                        nodes[cur].children.insert(tok.clone(), next);
                        next
                    }
                };
            }
            let labels = &mut nodes[cur].labels;
            if let Err(pos) = labels.binary_search(&label) {
                labels.insert(pos, label);
            }
        }
        Self { nodes }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_degree(&self) -> usize {
        self.nodes[0].children.len()
    }

    /// Labels under which `surface` is a complete entry.
    pub fn lookup<S: AsRef<str>>(&self, surface: &[S]) -> &[FineLabel] {
        let mut cur = 0;
        for tok in surface {
            match self.nodes[cur].children.get(tok.as_ref()) {
                Some(&next) => cur = next,
                None => return &[],
            }
        }
        &self.nodes[cur].labels
    }

    /// Longest match per (start, label), sorted by (start, label).
    /// Tokens must already be lowercased.
    pub fn match_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Match> {
        let mut out = Vec::new();
        let mut longest: [Option<usize>; NUM_FINE] = [None; NUM_FINE];
        for start in 0..tokens.len() {
            longest.iter_mut().for_each(|x| *x = None);
            let mut cur = 0;
            for (pos, tok) in tokens.iter().enumerate().skip(start) {
                match self.nodes[cur].children.get(tok.as_ref()) {
                    Some(&next) => cur = next,
                    None => break,
                }
                for l in &self.nodes[cur].labels {
                    longest[l.0] = Some(pos);
                }
            }
            for (l, end) in longest.iter().enumerate() {
                if let Some(end) = *end {
                    out.push(Match {
                        start,
                        end,
                        label: FineLabel(l),
                    });
                }
            }
        }
        out
    }
}

pub fn build_tree(g: &Gazetteer) -> SearchTree {
    SearchTree::build(g)
}

/// Match a sentence, lowercasing its tokens first.
pub fn match_sentence<S: AsRef<str>>(tree: &SearchTree, tokens: &[S]) -> Vec<Match> {
    let lowered: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
    tree.match_tokens(&lowered)
}

/// Build the `M × 67` multi-hot matrix for a word sequence of length `len`.
pub fn featurize(matches: &[Match], len: usize) -> Array2<f64> {
    let mut m = Array2::zeros((len, NUM_TAGS));
    for mt in matches {
        debug_assert!(mt.start <= mt.end && mt.end < len);
        m[[mt.start, Tag::begin(mt.label).0]] = 1.0;
        for i in mt.start + 1..=mt.end {
            m[[i, Tag::inside(mt.label).0]] = 1.0;
        }
    }
    for mut row in m.rows_mut() {
        if row.iter().all(|&v| v == 0.0) {
            row[Tag::O.0] = 1.0;
        }
    }
    m
}

/// Copy word rows onto their first subwords; other subword rows stay zero.
pub fn align_to_subwords(words: &Array2<f64>, ts: &TokenizedSentence) -> Result<Array2<f64>> {
    if words.nrows() != ts.num_words() {
        return Err(shape_err(
            format!("{} word rows", ts.num_words()),
            format!("{} rows", words.nrows()),
        ));
    }
    let mut out = Array2::zeros((ts.num_subwords(), words.ncols()));
    for (w, &sub) in ts.first_subword_of_word.iter().enumerate() {
        out.row_mut(sub).assign(&words.row(w));
    }
    Ok(out)
}

/// Dense CSV rendering with a header of tag names and the word in column 0.
pub fn features_to_csv<S: AsRef<str>>(words: &[S], m: &Array2<f64>) -> String {
    let mut out = String::from("word");
    for tag in Tag::all() {
        out.push(',');
        out.push_str(&tag.name());
    }
    out.push('\n');
    for (w, row) in words.iter().zip(m.rows()) {
        out.push_str(&csv_field(w.as_ref()));
        for v in row {
            out.push(',');
            out.push_str(if *v != 0.0 { "1" } else { "0" });
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
