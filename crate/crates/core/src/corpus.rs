//! CoNLL-style corpus I/O and BIO span handling.
//!
//! A corpus file holds one `token<whitespace>tag` pair per line, with a blank
//! line between sentences. Extra middle columns (as in `token _ _ tag`) are
//! ignored. A sentence may be preceded by a `# id <value>` comment; sentences
//! without one get the positional id `sent-<index>`, and [`emit_conll`] only
//! writes the comment back when the id differs from that default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{FineLabel, Tag};

/// A tokenized sentence with one gold tag per word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
}

/// A contiguous entity span, `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub start: usize,
    pub end: usize,
    pub label: FineLabel,
}

/// How [`parse_conll`] treats an `I-X` that does not continue an `X` span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BioMode {
    #[default]
    Strict,
    /// Rewrite orphan `I-X` to `B-X`.
    Lenient,
}

/// Result of parsing a corpus.
#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub sentences: Vec<Sentence>,
    /// Ids of sentences whose tags were repaired in lenient mode.
    pub repaired: Vec<String>,
}

pub fn default_id(index: usize) -> String {
    format!("sent-{index}")
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>, tags: Vec<Tag>) -> Result<Self> {
        let s = Self {
            id: id.into(),
            tokens,
            tags,
        };
        if s.tokens.len() != s.tags.len() {
            return Err(Error::InvalidArgument(format!(
                "sentence {}: {} tokens but {} tags",
                s.id,
                s.tokens.len(),
                s.tags.len()
            )));
        }
        s.validate()?;
        Ok(s)
    }

    /// Build from whitespace-separated tokens and tag names.
    pub fn from_strs(id: &str, tokens: &str, tags: &[&str]) -> Result<Self> {
        let tags = tags.iter().map(|t| Tag::from_name(t)).collect::<Result<_>>()?;
        Self::new(id, tokens.split_whitespace().map(str::to_string).collect(), tags)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        match first_bio_violation(&self.tags) {
            None => Ok(()),
            Some(position) => Err(Error::InvalidBio {
                id: self.id.clone(),
                position,
                message: format!(
                    "{} does not continue an entity of the same label",
                    self.tags[position]
                ),
            }),
        }
    }

    pub fn entities(&self) -> Vec<Entity> {
        extract_entities(&self.tags)
    }

    pub fn surface(&self, e: &Entity) -> &[String] {
        &self.tokens[e.start..=e.end]
    }
}

/// Position of the first `I-X` not preceded by `B-X` or `I-X`.
pub fn first_bio_violation(tags: &[Tag]) -> Option<usize> {
    let mut prev = Tag::O;
    for (i, &t) in tags.iter().enumerate() {
        if t.is_inside() && prev.label() != t.label() {
            return Some(i);
        }
        prev = t;
    }
    None
}

/// Rewrite every orphan `I-X` to `B-X`. Returns whether anything changed.
pub fn repair_bio(tags: &mut [Tag]) -> bool {
    let mut changed = false;
    let mut prev = Tag::O;
    for t in tags.iter_mut() {
        if t.is_inside() && prev.label() != t.label() {
            *t = Tag::begin(t.label().expect("inside tag has a label"));
            changed = true;
        }
        prev = *t;
    }
    changed
}

/// Maximal `B`-initiated spans, left to right. Expects valid BIO.
pub fn extract_entities(tags: &[Tag]) -> Vec<Entity> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        let t = tags[i];
        if let (true, Some(label)) = (t.is_begin(), t.label()) {
            let mut end = i;
            while end + 1 < tags.len() && tags[end + 1] == Tag::inside(label) {
                end += 1;
            }
            out.push(Entity {
                start: i,
                end,
                label,
            });
            i = end + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Tags spelling out `entities` over a sentence of length `len`.
pub fn entities_to_tags(entities: &[Entity], len: usize) -> Vec<Tag> {
    let mut tags = vec![Tag::O; len];
    for e in entities {
        tags[e.start] = Tag::begin(e.label);
        for t in &mut tags[e.start + 1..=e.end] {
            *t = Tag::inside(e.label);
        }
    }
    tags
}

pub fn parse_conll(text: &str) -> Result<Vec<Sentence>> {
    Ok(parse_conll_with(text, BioMode::Strict)?.sentences)
}

pub fn parse_conll_with(text: &str, mode: BioMode) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    let mut id: Option<String> = None;
    let mut tokens = Vec::new();
    let mut tags = Vec::new();

    let flush = |id: &mut Option<String>,
                     tokens: &mut Vec<String>,
                     tags: &mut Vec<Tag>,
                     out: &mut ParsedCorpus|
     -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let id = id.take().unwrap_or_else(|| default_id(out.sentences.len()));
        let mut tags = std::mem::take(tags);
        if let Some(position) = first_bio_violation(&tags) {
            match mode {
                BioMode::Strict => {
                    return Err(Error::InvalidBio {
                        id,
                        position,
                        message: format!("orphan {}", tags[position]),
                    })
                }
                BioMode::Lenient => {
                    repair_bio(&mut tags);
                    out.repaired.push(id.clone());
                }
            }
        }
        out.sentences.push(Sentence {
            id,
            tokens: std::mem::take(tokens),
            tags,
        });
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut id, &mut tokens, &mut tags, &mut out)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("# id ") {
            flush(&mut id, &mut tokens, &mut tags, &mut out)?;
            id = Some(rest.split_whitespace().next().unwrap_or("").to_string());
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("nonblank line has a field");
        let tag = fields.last().ok_or_else(|| Error::Parse {
            line: lineno + 1,
            message: format!("expected `token tag`, got `{line}`"),
        })?;
        let tag = Tag::from_name(tag).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        tokens.push(token.to_string());
        tags.push(tag);
    }
    flush(&mut id, &mut tokens, &mut tags, &mut out)?;
    Ok(out)
}

pub fn emit_conll(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if s.id != default_id(i) {
            out.push_str("# id ");
            out.push_str(&s.id);
            out.push('\n');
        }
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&tag.name());
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE2: &str = "where O\nto O\nbuy O\napple B-Food\niphone B-OtherPROD\n14 I-OtherPROD\n";

    fn label(name: &str) -> FineLabel {
        FineLabel::from_name(name).unwrap()
    }

    #[test]
    fn parses_single_block() {
        let s = parse_conll(TABLE2).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 6);
        assert_eq!(s[0].tokens[3], "apple");
        assert_eq!(s[0].tags[4], Tag::begin(label("OtherPROD")));
        assert_eq!(s[0].id, "sent-0");
    }

    #[test]
    fn empty_input() {
        assert!(parse_conll("").unwrap().is_empty());
        assert_eq!(emit_conll(&[]), "");
    }

    #[test]
    fn strict_rejects_orphan_inside() {
        let err = parse_conll("apple I-Food\npie I-Food\n").unwrap_err();
        assert!(matches!(err, Error::InvalidBio { position: 0, .. }), "{err}");
    }

    #[test]
    fn lenient_repairs_orphan_inside() {
        let parsed = parse_conll_with("apple I-Food\npie I-Food\nx O\ny I-Drink\n", BioMode::Lenient).unwrap();
        let s = &parsed.sentences[0];
        assert_eq!(s.tags[0], Tag::begin(label("Food")));
        assert_eq!(s.tags[1], Tag::inside(label("Food")));
        assert_eq!(s.tags[3], Tag::begin(label("Drink")));
        assert_eq!(parsed.repaired, vec!["sent-0".to_string()]);
    }

    #[test]
    fn unknown_tag_names_line() {
        let err = parse_conll("a O\n\nb O\nc B-Fruit\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn multi_column_and_ids() {
        let text = "# id abc domain=en\nwhere _ _ O\napple _ _ B-Food\n\n\n\nx _ _ O\n";
        let s = parse_conll(text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].id, "abc");
        assert_eq!(s[1].id, "sent-1");
    }

    #[test]
    fn emit_table2() {
        let s = parse_conll(TABLE2).unwrap();
        let text = emit_conll(&s);
        assert_eq!(text.lines().count(), 6);
        assert!(text.ends_with("14\tI-OtherPROD\n"));
    }

    #[test]
    fn emit_two_blocks_single_blank_line() {
        let s = parse_conll("a O\n\n# id z\nb B-Food\n").unwrap();
        let text = emit_conll(&s);
        assert_eq!(text, "a\tO\n\n# id z\nb\tB-Food\n");
        assert_eq!(parse_conll(&text).unwrap(), s);
    }

    #[test]
    fn entity_extraction() {
        let s = Sentence::from_strs(
            "t",
            "where to buy apple iphone 14",
            &["O", "O", "O", "B-OtherPROD", "I-OtherPROD", "I-OtherPROD"],
        )
        .unwrap();
        assert_eq!(
            s.entities(),
            vec![Entity {
                start: 3,
                end: 5,
                label: label("OtherPROD")
            }]
        );
        let food = label("Food");
        assert_eq!(
            extract_entities(&[Tag::begin(food), Tag::begin(food)]),
            vec![
                Entity { start: 0, end: 0, label: food },
                Entity { start: 1, end: 1, label: food }
            ]
        );
        assert!(extract_entities(&[Tag::O, Tag::O]).is_empty());
    }

    #[test]
    fn entities_to_tags_inverts_extraction() {
        let s = parse_conll(TABLE2).unwrap().remove(0);
        assert_eq!(entities_to_tags(&s.entities(), s.len()), s.tags);
    }
}
