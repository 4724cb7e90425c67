//! The fine/coarse entity label system and the BIO tag space built on it.
//!
//! Tag indices are fixed: `O` is 0, then for fine label `i` (in listing
//! order) `B-<label>` is `1 + 2i` and `I-<label>` is `2 + 2i`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coarse group names, in listing order.
pub const COARSE_LABELS: [&str; 6] = [
    "Location",
    "CreativeWork",
    "Group",
    "Person",
    "Product",
    "Medical",
];

/// Fine label names with their coarse group index, in listing order.
const FINE: [(&str, usize); 33] = [
    ("Facility", 0),
    ("OtherLOC", 0),
    ("HumanSettlement", 0),
    ("Station", 0),
    ("VisualWork", 1),
    ("MusicalWork", 1),
    ("WrittenWork", 1),
    ("ArtWork", 1),
    ("Software", 1),
    ("MusicalGRP", 2),
    ("PublicCORP", 2),
    ("PrivateCORP", 2),
    ("AerospaceManufacturer", 2),
    ("SportsGRP", 2),
    ("CarManufacturer", 2),
    ("ORG", 2),
    ("Scientist", 3),
    ("Artist", 3),
    ("Athlete", 3),
    ("Politician", 3),
    ("Cleric", 3),
    ("SportsManager", 3),
    ("OtherPER", 3),
    ("Clothing", 4),
    ("Vehicle", 4),
    ("Food", 4),
    ("Drink", 4),
    ("OtherPROD", 4),
    ("Medication/Vaccine", 5),
    ("MedicalProcedure", 5),
    ("AnatomicalStructure", 5),
    ("Symptom", 5),
    ("Disease", 5),
];

pub const NUM_FINE: usize = FINE.len();
pub const NUM_COARSE: usize = COARSE_LABELS.len();
/// Size of the BIO tag space (`2 * NUM_FINE + 1`).
pub const NUM_TAGS: usize = 2 * NUM_FINE + 1;

/// Index of a fine-grained entity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FineLabel(pub usize);

/// Index of a coarse-grained entity group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoarseLabel(pub usize);

/// Index into the 67-slot BIO tag space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tag(pub usize);

impl FineLabel {
    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_FINE {
            Ok(Self(index))
        } else {
            Err(Error::LabelOutOfRange(index))
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        FINE.iter()
            .position(|(n, _)| *n == name)
            .map(Self)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn name(self) -> &'static str {
        FINE[self.0].0
    }

    pub fn coarse(self) -> CoarseLabel {
        CoarseLabel(FINE[self.0].1)
    }

    pub fn all() -> impl Iterator<Item = FineLabel> {
        (0..NUM_FINE).map(FineLabel)
    }
}

impl fmt::Display for FineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl CoarseLabel {
    pub fn name(self) -> &'static str {
        COARSE_LABELS[self.0]
    }

    pub fn all() -> impl Iterator<Item = CoarseLabel> {
        (0..NUM_COARSE).map(CoarseLabel)
    }
}

impl fmt::Display for CoarseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Map a fine label index to its coarse group.
pub fn coarse_of(fine: usize) -> Result<CoarseLabel> {
    Ok(FineLabel::new(fine)?.coarse())
}

impl Tag {
    pub const O: Tag = Tag(0);

    pub fn begin(label: FineLabel) -> Tag {
        Tag(1 + 2 * label.0)
    }

    pub fn inside(label: FineLabel) -> Tag {
        Tag(2 + 2 * label.0)
    }

    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_TAGS {
            Ok(Self(index))
        } else {
            Err(Error::LabelOutOfRange(index))
        }
    }

    /// The fine label carried by a B/I tag, `None` for `O`.
    pub fn label(self) -> Option<FineLabel> {
        (self.0 > 0).then(|| FineLabel((self.0 - 1) / 2))
    }

    pub fn is_begin(self) -> bool {
        self.0 > 0 && self.0 % 2 == 1
    }

    pub fn is_inside(self) -> bool {
        self.0 > 0 && self.0.is_multiple_of(2)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        if name == "O" {
            return Ok(Tag::O);
        }
        let (prefix, label) = name
            .split_once('-')
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))?;
        let label = FineLabel::from_name(label)?;
        match prefix {
            "B" => Ok(Tag::begin(label)),
            "I" => Ok(Tag::inside(label)),
            _ => Err(Error::UnknownLabel(name.to_string())),
        }
    }

    pub fn name(self) -> String {
        match self.label() {
            None => "O".to_string(),
            Some(l) if self.is_begin() => format!("B-{}", l.name()),
            Some(l) => format!("I-{}", l.name()),
        }
    }

    pub fn all() -> impl Iterator<Item = Tag> {
        (0..NUM_TAGS).map(Tag)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Read-only view over the label system.
#[derive(Debug, Clone, Copy, Default)]
pub struct Taxonomy;

impl Taxonomy {
    pub fn fine_labels(&self) -> Vec<&'static str> {
        FINE.iter().map(|(n, _)| *n).collect()
    }

    pub fn coarse_labels(&self) -> &'static [&'static str] {
        &COARSE_LABELS
    }

    pub fn tag_space(&self) -> Vec<String> {
        Tag::all().map(Tag::name).collect()
    }

    pub fn fine_in_coarse(&self, coarse: CoarseLabel) -> Vec<FineLabel> {
        FineLabel::all().filter(|f| f.coarse() == coarse).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let t = Taxonomy;
        assert_eq!(t.fine_labels().len(), 33);
        assert_eq!(t.coarse_labels().len(), 6);
        assert_eq!(t.tag_space().len(), 67);
        let total: usize = CoarseLabel::all().map(|c| t.fine_in_coarse(c).len()).sum();
        assert_eq!(total, 33);
        assert_eq!(t.tag_space()[0], "O");
    }

    #[test]
    fn listed_groupings() {
        let counts: Vec<usize> = CoarseLabel::all()
            .map(|c| Taxonomy.fine_in_coarse(c).len())
            .collect();
        assert_eq!(counts, vec![4, 5, 7, 7, 5, 5]);
    }

    #[test]
    fn coarse_examples() {
        let of = |n: &str| coarse_of(FineLabel::from_name(n).unwrap().0).unwrap().name();
        assert_eq!(of("Scientist"), "Person");
        assert_eq!(of("Station"), "Location");
        assert_eq!(of("Disease"), "Medical");
        assert!(coarse_of(33).is_err());
    }

    #[test]
    fn tag_names_round_trip() {
        for tag in Tag::all() {
            assert_eq!(Tag::from_name(&tag.name()).unwrap(), tag);
        }
        let food = FineLabel::from_name("Food").unwrap();
        assert_eq!(Tag::from_name("B-Food").unwrap(), Tag::begin(food));
        assert_eq!(Tag::from_name("I-Medication/Vaccine").unwrap().name(), "I-Medication/Vaccine");
        assert!(Tag::from_name("B-Fruit").is_err());
        assert!(Tag::from_name("E-Food").is_err());
    }
}
