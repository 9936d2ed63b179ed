//! Faceted retrieval over a corpus of recommendations.
//!
//! Every concept id, concept name, lab key and intervention type of every
//! section is posted under an [`IndexKey`]. Queries are conjunctions of keys,
//! optionally narrowed by a numeric constraint on a population lab key.

mod file;
mod query;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{validate, BlockRef, Comparator, Quantity, Recommendation, SectionKind, ValidationReport};

pub use file::{read_index, write_index, INDEX_HEADER};
pub use query::parse_query;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("doc id {0:?} occurs more than once")]
    DuplicateDocId(String),
    #[error("facet {facet} is not indexed for the {section} section")]
    UnknownFacet { section: SectionKind, facet: Facet },
    #[error("query syntax: {0}")]
    QuerySyntax(String),
    #[error("document {doc_id:?} is invalid ({} errors)", .report.errors.len())]
    InvalidDocument { doc_id: String, report: ValidationReport },
    #[error("bad index file: {0}")]
    Format(String),
}

impl IndexError {
    pub fn code(&self) -> &'static str {
        match self {
            IndexError::DuplicateDocId(_) => "DUPLICATE_DOC_ID",
            IndexError::UnknownFacet { .. } => "UNKNOWN_FACET",
            IndexError::QuerySyntax(_) => "QUERY_SYNTAX",
            IndexError::InvalidDocument { .. } => "INVALID_DOCUMENT",
            IndexError::Format(_) => "INDEX_FORMAT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Facet {
    ConceptId,
    ConceptName,
    LabKey,
    InterventionType,
    /// Concept id or name of a disorder the population must not have.
    DisorderNegated,
}

impl Facet {
    pub const ALL: [Facet; 5] =
        [Facet::ConceptId, Facet::ConceptName, Facet::LabKey, Facet::InterventionType, Facet::DisorderNegated];

    pub fn as_str(self) -> &'static str {
        match self {
            Facet::ConceptId => "concept_id",
            Facet::ConceptName => "concept_name",
            Facet::LabKey => "lab_key",
            Facet::InterventionType => "intervention_type",
            Facet::DisorderNegated => "disorder_negated",
        }
    }

    pub fn parse(s: &str) -> Option<Facet> {
        Facet::ALL.into_iter().find(|f| f.as_str() == s)
    }

    /// Whether any block of `section` can be posted under this facet.
    pub fn applies_to(self, section: SectionKind) -> bool {
        match section {
            SectionKind::Population => true,
            SectionKind::Suggestion => {
                matches!(self, Facet::ConceptId | Facet::ConceptName | Facet::InterventionType)
            }
            SectionKind::Outcome => matches!(self, Facet::LabKey | Facet::ConceptName),
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Case-folds and trims a token.
pub fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexKey {
    pub section: SectionKind,
    pub facet: Facet,
    /// Always normalized.
    pub value: String,
}

impl IndexKey {
    pub fn new(section: SectionKind, facet: Facet, value: &str) -> Self {
        IndexKey { section, facet, value: normalize(value) }
    }
}

impl fmt::Display for IndexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}={}", self.section, self.facet, self.value)
    }
}

/// Numeric narrowing of a lab-key conjunct: `key <op> value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabConstraint {
    pub operator: Comparator,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conjunct {
    pub key: IndexKey,
    pub lab: Option<LabConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub conjuncts: Vec<Conjunct>,
}

/// One end of an interval; `closed` includes the endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound {
    at: f64,
    closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    low: Bound,
    high: Bound,
}

impl Interval {
    const OPEN_LOW: Bound = Bound { at: f64::NEG_INFINITY, closed: false };
    const OPEN_HIGH: Bound = Bound { at: f64::INFINITY, closed: false };

    fn below(at: f64, closed: bool) -> Self {
        Interval { low: Self::OPEN_LOW, high: Bound { at, closed } }
    }

    fn above(at: f64, closed: bool) -> Self {
        Interval { low: Bound { at, closed }, high: Self::OPEN_HIGH }
    }

    fn point(at: f64) -> Self {
        Interval { low: Bound { at, closed: true }, high: Bound { at, closed: true } }
    }

    fn intersects(&self, other: &Interval) -> bool {
        let low = if self.low.at > other.low.at || (self.low.at == other.low.at && !self.low.closed) {
            self.low
        } else {
            other.low
        };
        let high = if self.high.at < other.high.at || (self.high.at == other.high.at && !self.high.closed) {
            self.high
        } else {
            other.high
        };
        low.at < high.at || (low.at == high.at && low.closed && high.closed)
    }
}

/// The set of values satisfying `x <op> q`, as a union of intervals.
fn solutions(op: Comparator, q: &Quantity) -> Vec<Interval> {
    match (op, *q) {
        (Comparator::InRange, Quantity::Range { low, high }) => {
            vec![Interval { low: Bound { at: low, closed: true }, high: Bound { at: high, closed: true } }]
        }
        (_, Quantity::Range { .. }) | (Comparator::InRange, _) => Vec::new(),
        (op, Quantity::Scalar(v)) => match op {
            Comparator::Lt => vec![Interval::below(v, false)],
            Comparator::Le => vec![Interval::below(v, true)],
            Comparator::Gt => vec![Interval::above(v, false)],
            Comparator::Ge => vec![Interval::above(v, true)],
            Comparator::Eq => vec![Interval::point(v)],
            Comparator::Ne => vec![Interval::below(v, false), Interval::above(v, false)],
            Comparator::InRange => unreachable!(),
        },
    }
}

/// Whether some value satisfies both the criterion and the constraint.
pub fn jointly_satisfiable(criterion_op: Comparator, criterion_value: &Quantity, constraint: &LabConstraint) -> bool {
    let wanted = solutions(constraint.operator, &Quantity::Scalar(constraint.value));
    solutions(criterion_op, criterion_value)
        .iter()
        .any(|a| wanted.iter().any(|b| a.intersects(b)))
}

/// Postings plus the documents they point into.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecommendationIndex {
    postings: BTreeMap<IndexKey, BTreeSet<String>>,
    docs: BTreeMap<String, Recommendation>,
}

/// Index keys posted for one document.
pub fn document_keys(rec: &Recommendation) -> BTreeSet<IndexKey> {
    let mut keys = BTreeSet::new();
    let mut post = |section, facet, value: &str| {
        if !value.trim().is_empty() {
            keys.insert(IndexKey::new(section, facet, value));
        }
    };
    for (section, block) in rec.blocks() {
        match block {
            BlockRef::Demographics(_) => {}
            BlockRef::Disorder(d) => {
                let (id_facet, name_facet) =
                    if d.negation { (Facet::DisorderNegated, Facet::DisorderNegated) } else { (Facet::ConceptId, Facet::ConceptName) };
                if let Some(c) = &d.concept {
                    post(section, id_facet, &c.dict_id);
                }
                post(section, name_facet, &d.name);
            }
            BlockRef::Intervention(i) => {
                if let Some(c) = &i.concept {
                    post(section, Facet::ConceptId, &c.dict_id);
                }
                post(section, Facet::ConceptName, &i.name);
                if let Some(t) = &i.intervention_type {
                    post(section, Facet::InterventionType, t);
                }
            }
            BlockRef::LabCriterion(l) => post(section, Facet::LabKey, &l.key),
            BlockRef::GeneralOutcome(o) => post(section, Facet::ConceptName, &o.outcome_text),
        }
    }
    keys
}

impl RecommendationIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a valid document; its id must be new.
    pub fn insert(&mut self, rec: Recommendation) -> Result<(), IndexError> {
        if self.docs.contains_key(&rec.doc_id) {
            return Err(IndexError::DuplicateDocId(rec.doc_id));
        }
        let report = validate(&rec);
        if !report.is_valid() {
            return Err(IndexError::InvalidDocument { doc_id: rec.doc_id, report });
        }
        for key in document_keys(&rec) {
            self.postings.entry(key).or_default().insert(rec.doc_id.clone());
        }
        self.docs.insert(rec.doc_id.clone(), rec);
        Ok(())
    }

    pub fn postings(&self) -> &BTreeMap<IndexKey, BTreeSet<String>> {
        &self.postings
    }

    pub fn docs(&self) -> &BTreeMap<String, Recommendation> {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn posting(&self, key: &IndexKey) -> Option<&BTreeSet<String>> {
        self.postings.get(key)
    }

    fn lab_match(&self, doc_id: &str, key: &str, constraint: &LabConstraint) -> bool {
        let Some(rec) = self.docs.get(doc_id) else { return false };
        rec.population
            .lab_criteria
            .iter()
            .any(|l| normalize(&l.key) == key && jointly_satisfiable(l.operator, &l.value, constraint))
    }

    /// Ids of documents satisfying every conjunct, in id order.
    pub fn query(&self, q: &Query) -> Result<Vec<String>, IndexError> {
        for c in &q.conjuncts {
            if !c.key.facet.applies_to(c.key.section) {
                return Err(IndexError::UnknownFacet { section: c.key.section, facet: c.key.facet });
            }
            if c.lab.is_some() && (c.key.facet != Facet::LabKey || c.key.section != SectionKind::Population) {
                return Err(IndexError::UnknownFacet { section: c.key.section, facet: c.key.facet });
            }
        }
        let mut result: Option<BTreeSet<String>> = None;
        for c in &q.conjuncts {
            let Some(posting) = self.postings.get(&c.key) else { return Ok(Vec::new()) };
            let hits: BTreeSet<String> = posting
                .iter()
                .filter(|id| c.lab.as_ref().is_none_or(|lab| self.lab_match(id, &c.key.value, lab)))
                .filter(|id| result.as_ref().is_none_or(|r| r.contains(*id)))
                .cloned()
                .collect();
            result = Some(hits);
        }
        Ok(result.unwrap_or_default().into_iter().collect())
    }
}

/// Indexes a corpus, rejecting repeated doc ids and invalid documents.
pub fn build_index(corpus: impl IntoIterator<Item = Recommendation>) -> Result<RecommendationIndex, IndexError> {
    let mut index = RecommendationIndex::new();
    for rec in corpus {
        index.insert(rec)?;
    }
    Ok(index)
}
