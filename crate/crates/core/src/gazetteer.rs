//! Gazetteer construction from a typed-entity dump.
//!
//! Every record in the dump pairs a surface form with an opaque source type.
//! A source type is assigned to task labels either by a manual one-to-one
//! mapping or statistically: measure, per label, the fraction of gold entity
//! occurrences whose surface the type contains, then assign the type to its
//! `k` best-covering labels.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::taxonomy::{FineLabel, NUM_FINE};

/// A lowercased token sequence.
pub type Surface = Vec<String>;

pub fn normalize_surface<S: AsRef<str>>(tokens: &[S]) -> Surface {
    tokens.iter().map(|t| t.as_ref().to_lowercase()).collect()
}

pub fn surface_from_str(text: &str) -> Surface {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// One line of the typed-entity dump.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeRecord {
    pub surface: Surface,
    pub source_type: String,
}

impl TypeRecord {
    pub fn new(surface: &str, source_type: &str) -> Self {
        Self {
            surface: surface_from_str(surface),
            source_type: source_type.to_string(),
        }
    }
}

/// Fine label → set of surfaces. A surface may sit under several labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    buckets: BTreeMap<FineLabel, BTreeSet<Surface>>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: FineLabel, surface: Surface) {
        if surface.is_empty() {
            return;
        }
        self.buckets.entry(label).or_default().insert(normalize_surface(&surface));
    }

    pub fn contains(&self, label: FineLabel, surface: &[String]) -> bool {
        self.buckets.get(&label).is_some_and(|b| b.contains(surface))
    }

    pub fn contains_any(&self, surface: &[String]) -> bool {
        self.buckets.values().any(|b| b.contains(surface))
    }

    pub fn bucket(&self, label: FineLabel) -> Option<&BTreeSet<Surface>> {
        self.buckets.get(&label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (FineLabel, &Surface)> {
        self.buckets
            .iter()
            .flat_map(|(l, b)| b.iter().map(move |s| (*l, s)))
    }

    /// Number of (surface, label) entries.
    pub fn len(&self) -> usize {
        self.buckets.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn union(&mut self, other: &Gazetteer) {
        for (l, s) in other.iter() {
            self.insert(l, s.clone());
        }
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "surface\tfine_label")?;
        for (label, surface) in self.iter() {
            writeln!(w, "{}\t{}", surface.join(" "), label.name())?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut g = Gazetteer::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 && line == "surface\tfine_label" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (surface, label) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `surface<TAB>fine_label`".into(),
            })?;
            let label = FineLabel::from_name(label.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let surface = surface_from_str(surface);
            if surface.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "empty surface".into(),
                });
            }
            g.insert(label, surface);
        }
        Ok(g)
    }
}

/// Parse a dump of `surface<TAB>source_type` lines.
pub fn load_dump<R: BufRead>(r: R) -> Result<Vec<TypeRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (surface, ty) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `surface<TAB>source_type`".into(),
        })?;
        let surface = surface_from_str(surface);
        if surface.is_empty() || ty.trim().is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty surface or type".into(),
            });
        }
        out.push(TypeRecord {
            surface,
            source_type: ty.trim().to_string(),
        });
    }
    Ok(out)
}

/// Coverage of each source type over each label's gold entity occurrences.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMatrix {
    /// Source types in sorted order; rows of `values`.
    pub types: Vec<String>,
    pub values: Vec<[f64; NUM_FINE]>,
    /// Gold occurrence count per label.
    pub gold_counts: [usize; NUM_FINE],
}

impl CoverageMatrix {
    pub fn get(&self, source_type: &str, label: FineLabel) -> f64 {
        self.types
            .binary_search_by(|t| t.as_str().cmp(source_type))
            .map(|i| self.values[i][label.0])
            .unwrap_or(0.0)
    }

    /// Labels with zero gold occurrences; their coverage is defined as 0.
    pub fn empty_labels(&self) -> Vec<FineLabel> {
        FineLabel::all().filter(|l| self.gold_counts[l.0] == 0).collect()
    }

    /// The `k` best-covered labels of a row, ties to the lower index, zeros dropped.
    pub fn top_k(&self, row: usize, k: usize) -> Vec<FineLabel> {
        let mut order: Vec<usize> = (0..NUM_FINE).filter(|&l| self.values[row][l] > 0.0).collect();
        order.sort_by(|&a, &b| {
            self.values[row][b]
                .partial_cmp(&self.values[row][a])
                .expect("finite coverage")
                .then(a.cmp(&b))
        });
        order.into_iter().take(k).map(FineLabel).collect()
    }

    /// Best-covered label per type (types with an all-zero row are absent).
    pub fn argmax_mapping(&self) -> BTreeMap<String, FineLabel> {
        (0..self.types.len())
            .filter_map(|r| self.top_k(r, 1).first().map(|l| (self.types[r].clone(), *l)))
            .collect()
    }
}

fn gold_occurrences(reference: &[Sentence]) -> Vec<(Surface, FineLabel)> {
    reference
        .iter()
        .flat_map(|s| {
            s.entities()
                .into_iter()
                .map(move |e| (normalize_surface(s.surface(&e)), e.label))
        })
        .collect()
}

fn surfaces_by_type(records: &[TypeRecord]) -> BTreeMap<&str, HashSet<&Surface>> {
    let mut out: BTreeMap<&str, HashSet<&Surface>> = BTreeMap::new();
    for r in records {
        out.entry(r.source_type.as_str()).or_default().insert(&r.surface);
    }
    out
}

pub fn type_label_coverage(records: &[TypeRecord], reference: &[Sentence]) -> CoverageMatrix {
    let gold = gold_occurrences(reference);
    let mut gold_counts = [0usize; NUM_FINE];
    for (_, l) in &gold {
        gold_counts[l.0] += 1;
    }
    let by_type = surfaces_by_type(records);
    let mut m = CoverageMatrix {
        types: Vec::new(),
        values: Vec::new(),
        gold_counts,
    };
    for (ty, surfaces) in by_type {
        let mut hits = [0usize; NUM_FINE];
        for (surface, l) in &gold {
            if surfaces.contains(surface) {
                hits[l.0] += 1;
            }
        }
        let mut row = [0.0; NUM_FINE];
        for l in 0..NUM_FINE {
            if gold_counts[l] > 0 {
                row[l] = hits[l] as f64 / gold_counts[l] as f64;
            }
        }
        m.types.push(ty.to_string());
        m.values.push(row);
    }
    m
}

/// Assign each source type to its `k` best-covering labels.
pub fn build_statistical(records: &[TypeRecord], reference: &[Sentence], k: usize) -> Result<Gazetteer> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if reference.iter().all(|s| s.entities().is_empty()) {
        return Err(Error::InvalidArgument(
            "reference corpus has no gold entities; coverage is undefined".into(),
        ));
    }
    let coverage = type_label_coverage(records, reference);
    let assignment: HashMap<&str, Vec<FineLabel>> = (0..coverage.types.len())
        .map(|r| (coverage.types[r].as_str(), coverage.top_k(r, k)))
        .collect();
    let mut g = Gazetteer::new();
    for r in records {
        for &label in assignment.get(r.source_type.as_str()).into_iter().flatten() {
            g.insert(label, r.surface.clone());
        }
    }
    Ok(g)
}

pub fn build_one_to_one(records: &[TypeRecord], mapping: &BTreeMap<String, FineLabel>) -> Result<Gazetteer> {
    if let Some(bad) = mapping.values().find(|l| l.0 >= NUM_FINE) {
        return Err(Error::LabelOutOfRange(bad.0));
    }
    let mut g = Gazetteer::new();
    for r in records {
        if let Some(&label) = mapping.get(&r.source_type) {
            g.insert(label, r.surface.clone());
        }
    }
    Ok(g)
}

/// Parse a `source_type<TAB>fine_label` mapping file.
pub fn load_mapping<R: BufRead>(r: R) -> Result<BTreeMap<String, FineLabel>> {
    let mut out = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (ty, label) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `source_type<TAB>fine_label`".into(),
        })?;
        out.insert(ty.trim().to_string(), FineLabel::from_name(label.trim())?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRates {
    /// Gold occurrences whose (surface, label) pair is in the gazetteer.
    pub label_match: f64,
    /// Gold occurrences whose surface is in any bucket.
    pub label_agnostic: f64,
}

pub fn coverage_rate(g: &Gazetteer, reference: &[Sentence]) -> CoverageRates {
    let gold = gold_occurrences(reference);
    if gold.is_empty() {
        return CoverageRates {
            label_match: 0.0,
            label_agnostic: 0.0,
        };
    }
    let matched = gold.iter().filter(|(s, l)| g.contains(*l, s)).count();
    let any = gold.iter().filter(|(s, _)| g.contains_any(s)).count();
    CoverageRates {
        label_match: matched as f64 / gold.len() as f64,
        label_agnostic: any as f64 / gold.len() as f64,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeLabelCoverage {
    pub source_type: String,
    pub fine_label: String,
    pub coverage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageTotals {
    pub entries: usize,
    pub gold_entities: usize,
    pub records: usize,
}

/// Serializable summary of a gazetteer against a reference corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Nonzero cells of the type × label coverage matrix.
    pub per_type_label: Vec<TypeLabelCoverage>,
    pub per_label_rate: BTreeMap<String, f64>,
    pub overall_rate: f64,
    pub overall_rate_label_agnostic: f64,
    pub totals: CoverageTotals,
}

impl CoverageReport {
    pub fn new(g: &Gazetteer, records: &[TypeRecord], reference: &[Sentence]) -> Self {
        let matrix = type_label_coverage(records, reference);
        let per_type_label = matrix
            .types
            .iter()
            .zip(&matrix.values)
            .flat_map(|(t, row)| {
                FineLabel::all()
                    .filter(|l| row[l.0] > 0.0)
                    .map(|l| TypeLabelCoverage {
                        source_type: t.clone(),
                        fine_label: l.name().to_string(),
                        coverage: row[l.0],
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let gold = gold_occurrences(reference);
        let mut per_label_rate = BTreeMap::new();
        for l in FineLabel::all().filter(|l| matrix.gold_counts[l.0] > 0) {
            let hits = gold.iter().filter(|(s, gl)| *gl == l && g.contains(l, s)).count();
            per_label_rate.insert(l.name().to_string(), hits as f64 / matrix.gold_counts[l.0] as f64);
        }
        let rates = coverage_rate(g, reference);
        Self {
            per_type_label,
            per_label_rate,
            overall_rate: rates.label_match,
            overall_rate_label_agnostic: rates.label_agnostic,
            totals: CoverageTotals {
                entries: g.len(),
                gold_entities: gold.len(),
                records: records.len(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn l(name: &str) -> FineLabel {
        FineLabel::from_name(name).unwrap()
    }

    fn sent(tokens: &str, tags: &[&str]) -> Sentence {
        Sentence::from_strs("x", tokens, tags).unwrap()
    }

    #[test]
    fn coverage_by_hand() {
        let records = vec![TypeRecord::new("apple", "t")];
        let reference = vec![sent("apple and pear", &["B-Food", "O", "B-Food"])];
        let m = type_label_coverage(&records, &reference);
        assert_eq!(m.get("t", l("Food")), 0.5);
        assert_eq!(m.get("t", l("Drink")), 0.0);
        assert!(m.empty_labels().contains(&l("Drink")));

        let m = type_label_coverage(&[], &reference);
        assert!(m.types.is_empty());

        let records = vec![TypeRecord::new("Apple", "t"), TypeRecord::new("pear", "t")];
        assert_eq!(type_label_coverage(&records, &reference).get("t", l("Food")), 1.0);
    }

    #[test]
    fn statistical_top_two() {
        // type t covers 3/5 Food and 2/5 Drink occurrences.
        let reference = vec![
            sent("a b c", &["B-Food", "B-Food", "B-Food"]),
            sent("d e", &["B-Food", "B-Food"]),
            sent("x y z w v", &["B-Drink", "B-Drink", "B-Drink", "B-Drink", "B-Drink"]),
        ];
        let records: Vec<_> = ["a", "b", "c", "x", "y", "q"]
            .iter()
            .map(|s| TypeRecord::new(s, "t"))
            .collect();
        let m = type_label_coverage(&records, &reference);
        assert_eq!(m.get("t", l("Food")), 0.6);
        assert_eq!(m.get("t", l("Drink")), 0.4);

        let g = build_statistical(&records, &reference, 2).unwrap();
        let labels: BTreeSet<_> = g.iter().map(|(lab, _)| lab).collect();
        assert_eq!(labels, [l("Food"), l("Drink")].into_iter().collect());
        assert_eq!(g.bucket(l("Food")).unwrap().len(), 6);

        let g1 = build_statistical(&records, &reference, 1).unwrap();
        assert_eq!(g1.bucket(l("Food")).unwrap().len(), 6);
        assert!(g1.bucket(l("Drink")).is_none());
    }

    #[test]
    fn zero_row_dropped_and_ties_low_index() {
        let reference = vec![sent("a b", &["B-Food", "B-Drink"])];
        let records = vec![
            TypeRecord::new("zzz", "unused"),
            TypeRecord::new("a", "tie"),
            TypeRecord::new("b", "tie"),
        ];
        let g = build_statistical(&records, &reference, 1).unwrap();
        assert!(!g.contains_any(&surface_from_str("zzz")));
        // Food (25) precedes Drink (26).
        assert!(g.contains(l("Food"), &surface_from_str("b")));
        assert!(!g.contains(l("Drink"), &surface_from_str("b")));
    }

    #[test]
    fn statistical_requires_entities() {
        let reference = vec![sent("a", &["O"])];
        assert!(build_statistical(&[TypeRecord::new("a", "t")], &reference, 2).is_err());
        assert!(build_statistical(&[], &[sent("a", &["B-Food"])], 0).is_err());
    }

    #[test]
    fn one_to_one() {
        let records = vec![
            TypeRecord::new("apple", "t1"),
            TypeRecord::new("pear", "t1"),
            TypeRecord::new("kiwi", "t3"),
            TypeRecord::new("cola", "t2"),
        ];
        let mapping: BTreeMap<_, _> = [("t1".to_string(), l("Food")), ("t3".to_string(), l("Food"))].into();
        let g = build_one_to_one(&records, &mapping).unwrap();
        let food: BTreeSet<_> = ["apple", "pear", "kiwi"].iter().map(|s| surface_from_str(s)).collect();
        assert_eq!(g.bucket(l("Food")).unwrap(), &food);
        assert!(!g.contains_any(&surface_from_str("cola")));

        let bad: BTreeMap<_, _> = [("t1".to_string(), FineLabel(40))].into();
        assert!(build_one_to_one(&records, &bad).is_err());
    }

    #[test]
    fn coverage_rate_counts_occurrences() {
        let tags: Vec<&str> = vec!["B-Food"; 10];
        let reference = vec![sent("a b c d e f g h i j", &tags)];
        let mut g = Gazetteer::new();
        for s in ["a", "b", "c", "d"] {
            g.insert(l("Food"), surface_from_str(s));
        }
        g.insert(l("Drink"), surface_from_str("e"));
        let r = coverage_rate(&g, &reference);
        assert_eq!(r.label_match, 0.4);
        assert_eq!(r.label_agnostic, 0.5);
    }

    #[test]
    fn save_load() {
        let mut g = Gazetteer::new();
        let mut buf = Vec::new();
        g.save(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "surface\tfine_label\n");
        assert_eq!(Gazetteer::load(&buf[..]).unwrap(), g);

        g.insert(l("OtherPROD"), surface_from_str("apple iphone 14"));
        let mut buf = Vec::new();
        g.save(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "apple iphone 14\tOtherPROD");
        assert_eq!(Gazetteer::load(&buf[..]).unwrap(), g);

        let err = Gazetteer::load("surface\tfine_label\nfoo\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = Gazetteer::load("foo\tNotALabel\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn report_fields_in_range() {
        let reference = vec![sent("apple pie cola", &["B-Food", "I-Food", "B-Drink"])];
        let records = vec![TypeRecord::new("apple pie", "dish"), TypeRecord::new("cola", "soda")];
        let g = build_statistical(&records, &reference, 2).unwrap();
        let report = CoverageReport::new(&g, &records, &reference);
        assert_eq!(report.overall_rate, 1.0);
        assert_eq!(report.totals.entries, 2);
        assert_eq!(report.totals.gold_entities, 2);
        assert!(report.per_type_label.iter().all(|c| (0.0..=1.0).contains(&c.coverage)));
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"overall_rate\":1.0"));
    }
}
