use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

/// Identifier of a concept block or expression output, unique within one document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BlockId(String);

impl BlockId {
    pub fn new(id: impl Into<String>) -> Self {
        BlockId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Non-empty and free of whitespace.
    pub fn is_well_formed(&self) -> bool {
        !self.0.is_empty() && !self.0.chars().any(char::is_whitespace)
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for BlockId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for BlockId {
    fn from(s: &str) -> Self {
        BlockId(s.to_owned())
    }
}

impl From<String> for BlockId {
    fn from(s: String) -> Self {
        BlockId(s)
    }
}

pub const UMLS: &str = "UMLS";

/// Link from a text mention to a terminology concept.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DictionaryRef {
    pub dictionary: String,
    pub dict_id: String,
}

impl DictionaryRef {
    pub fn new(dictionary: impl Into<String>, dict_id: impl Into<String>) -> Self {
        DictionaryRef { dictionary: dictionary.into(), dict_id: dict_id.into() }
    }

    pub fn umls(cui: impl Into<String>) -> Self {
        DictionaryRef::new(UMLS, cui)
    }

    pub fn is_umls(&self) -> bool {
        self.dictionary == UMLS
    }
}

/// True for the UMLS concept identifier shape: `C` followed by seven digits.
pub fn is_cui_shaped(id: &str) -> bool {
    let bytes = id.as_bytes();
    bytes.len() == 8 && bytes[0] == b'C' && bytes[1..].iter().all(u8::is_ascii_digit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TimePeriod {
    Current,
    Past,
    #[default]
    Unspecified,
}

impl TimePeriod {
    pub fn as_str(self) -> &'static str {
        match self {
            TimePeriod::Current => "current",
            TimePeriod::Past => "past",
            TimePeriod::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for TimePeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimePeriod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "current" => Ok(TimePeriod::Current),
            "past" => Ok(TimePeriod::Past),
            "unspecified" => Ok(TimePeriod::Unspecified),
            other => Err(format!("unknown time period {other:?}")),
        }
    }
}

/// Comparison operator of a numeric criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    InRange,
}

impl Comparator {
    pub const ALL: [Comparator; 7] = [
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
        Comparator::Eq,
        Comparator::Ne,
        Comparator::InRange,
    ];

    /// Canonical ASCII wire token.
    pub fn token(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::InRange => "in",
        }
    }

    /// Accepts the ASCII tokens plus the mathematical symbols `≤ ≥ ≠` and `==`.
    pub fn parse_token(s: &str) -> Option<Comparator> {
        Some(match s.trim() {
            "<" => Comparator::Lt,
            "<=" | "≤" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" | "≥" => Comparator::Ge,
            "=" | "==" => Comparator::Eq,
            "!=" | "≠" => Comparator::Ne,
            t if t.eq_ignore_ascii_case("in") => Comparator::InRange,
            _ => return None,
        })
    }

    /// Whether `observed` satisfies `observed <op> reference`.
    ///
    /// Returns `None` when the operator and quantity shapes disagree
    /// (a range with a scalar operator or `in` with a scalar).
    pub fn holds(self, observed: f64, reference: &Quantity) -> Option<bool> {
        match (self, *reference) {
            (Comparator::InRange, Quantity::Range { low, high }) => {
                Some(low <= observed && observed <= high)
            }
            (Comparator::InRange, Quantity::Scalar(_)) | (_, Quantity::Range { .. }) => None,
            (op, Quantity::Scalar(v)) => Some(match op {
                Comparator::Lt => observed < v,
                Comparator::Le => observed <= v,
                Comparator::Gt => observed > v,
                Comparator::Ge => observed >= v,
                Comparator::Eq => observed == v,
                Comparator::Ne => observed != v,
                Comparator::InRange => unreachable!(),
            }),
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A numeric scalar or an inclusive range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Scalar(f64),
    Range { low: f64, high: f64 },
}

impl Quantity {
    pub fn is_range(&self) -> bool {
        matches!(self, Quantity::Range { .. })
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Quantity::Scalar(v) => v.is_finite(),
            Quantity::Range { low, high } => low.is_finite() && high.is_finite(),
        }
    }
}

/// Written as `40` or `0.5..0.8`.
impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Scalar(v) => write!(f, "{v}"),
            Quantity::Range { low, high } => write!(f, "{low}..{high}"),
        }
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once("..") {
            Some((low, high)) => Ok(Quantity::Range { low: parse_number(low)?, high: parse_number(high)? }),
            None => Ok(Quantity::Scalar(parse_number(s)?)),
        }
    }
}

/// Parses a finite decimal number; rejects `inf`, `NaN` and friends.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let ok_chars = !t.is_empty()
        && t.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    match t.parse::<f64>() {
        Ok(v) if ok_chars && v.is_finite() => Ok(v),
        _ => Err(format!("{s:?} is not a finite number")),
    }
}

/// Operator plus value, e.g. `>= 65`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericConstraint {
    pub operator: Comparator,
    pub value: Quantity,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Demographics {
    pub id: BlockId,
    /// Age in years.
    pub age: Option<NumericConstraint>,
    pub gender: Option<String>,
    pub ethnicity: Option<String>,
    pub country: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Disorder {
    pub id: BlockId,
    pub name: String,
    pub concept: Option<DictionaryRef>,
    pub time_period: TimePeriod,
    pub negation: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Intervention {
    pub id: BlockId,
    pub name: String,
    pub intervention_type: Option<String>,
    pub concept: Option<DictionaryRef>,
    pub time_period: TimePeriod,
    /// Verbatim qualifier such as "was taking" or "may be considered".
    pub modifier_text: Option<String>,
    /// Evidence grade token, e.g. `2B`.
    pub grade: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabCriterion {
    pub id: BlockId,
    pub key: String,
    pub value: Quantity,
    pub unit: Option<String>,
    pub operator: Comparator,
    pub temporal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneralOutcome {
    pub id: BlockId,
    pub outcome_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExprType {
    And,
    Or,
    ComparedTo,
}

impl ExprType {
    pub fn as_str(self) -> &'static str {
        match self {
            ExprType::And => "AND",
            ExprType::Or => "OR",
            ExprType::ComparedTo => "COMPARED_TO",
        }
    }
}

impl fmt::Display for ExprType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExprType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AND" => Ok(ExprType::And),
            "OR" => Ok(ExprType::Or),
            "COMPARED_TO" => Ok(ExprType::ComparedTo),
            _ => Err(format!("unknown expression type {s:?}")),
        }
    }
}

/// One `<expr>`: combines its inputs and names the result `output`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprNode {
    pub expr_type: ExprType,
    pub inputs: Vec<BlockId>,
    pub output: BlockId,
}

impl ExprNode {
    pub fn new<I, S>(expr_type: ExprType, inputs: I, output: impl Into<BlockId>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<BlockId>,
    {
        ExprNode { expr_type, inputs: inputs.into_iter().map(Into::into).collect(), output: output.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Population {
    pub demographics: Vec<Demographics>,
    pub disorders: Vec<Disorder>,
    pub interventions: Vec<Intervention>,
    pub lab_criteria: Vec<LabCriterion>,
    pub exprs: Vec<ExprNode>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Suggestion {
    pub interventions: Vec<Intervention>,
    pub exprs: Vec<ExprNode>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub general: Vec<GeneralOutcome>,
    pub lab_criteria: Vec<LabCriterion>,
}

/// Where a recommendation came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Source {
    pub origin: Option<String>,
    pub citations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recommendation {
    pub doc_id: String,
    pub source_text: Option<String>,
    pub source: Option<Source>,
    pub population: Population,
    pub suggestion: Suggestion,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SectionKind {
    Population,
    Suggestion,
    Outcome,
}

impl SectionKind {
    pub const ALL: [SectionKind; 3] = [SectionKind::Population, SectionKind::Suggestion, SectionKind::Outcome];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Population => "population",
            SectionKind::Suggestion => "suggestion",
            SectionKind::Outcome => "outcome",
        }
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Borrowed view of any concept block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockRef<'a> {
    Demographics(&'a Demographics),
    Disorder(&'a Disorder),
    Intervention(&'a Intervention),
    LabCriterion(&'a LabCriterion),
    GeneralOutcome(&'a GeneralOutcome),
}

impl<'a> BlockRef<'a> {
    pub fn id(&self) -> &'a BlockId {
        match self {
            BlockRef::Demographics(b) => &b.id,
            BlockRef::Disorder(b) => &b.id,
            BlockRef::Intervention(b) => &b.id,
            BlockRef::LabCriterion(b) => &b.id,
            BlockRef::GeneralOutcome(b) => &b.id,
        }
    }

    /// Wire element name of the block.
    pub fn element(&self) -> &'static str {
        match self {
            BlockRef::Demographics(_) => "demographics",
            BlockRef::Disorder(_) => "disorder",
            BlockRef::Intervention(_) => "intervention",
            BlockRef::LabCriterion(_) => "labResults",
            BlockRef::GeneralOutcome(_) => "generalOutcome",
        }
    }
}

/// A section whose blocks can be wired together by expressions.
pub trait ExprSection {
    const KIND: SectionKind;

    /// Blocks in canonical element order.
    fn blocks(&self) -> Vec<BlockRef<'_>>;

    fn exprs(&self) -> &[ExprNode];

    fn find_block(&self, id: &str) -> Option<BlockRef<'_>> {
        self.blocks().into_iter().find(|b| b.id().as_str() == id)
    }

    fn is_empty(&self) -> bool {
        self.blocks().is_empty() && self.exprs().is_empty()
    }
}

impl ExprSection for Population {
    const KIND: SectionKind = SectionKind::Population;

    fn blocks(&self) -> Vec<BlockRef<'_>> {
        let mut out = Vec::with_capacity(
            self.demographics.len() + self.disorders.len() + self.interventions.len() + self.lab_criteria.len(),
        );
        out.extend(self.demographics.iter().map(BlockRef::Demographics));
        out.extend(self.disorders.iter().map(BlockRef::Disorder));
        out.extend(self.interventions.iter().map(BlockRef::Intervention));
        out.extend(self.lab_criteria.iter().map(BlockRef::LabCriterion));
        out
    }

    fn exprs(&self) -> &[ExprNode] {
        &self.exprs
    }
}

impl ExprSection for Suggestion {
    const KIND: SectionKind = SectionKind::Suggestion;

    fn blocks(&self) -> Vec<BlockRef<'_>> {
        self.interventions.iter().map(BlockRef::Intervention).collect()
    }

    fn exprs(&self) -> &[ExprNode] {
        &self.exprs
    }
}

impl Outcome {
    pub fn blocks(&self) -> Vec<BlockRef<'_>> {
        self.general
            .iter()
            .map(BlockRef::GeneralOutcome)
            .chain(self.lab_criteria.iter().map(BlockRef::LabCriterion))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.general.is_empty() && self.lab_criteria.is_empty()
    }
}

impl Recommendation {
    /// Every block of every section, in canonical order.
    pub fn blocks(&self) -> Vec<(SectionKind, BlockRef<'_>)> {
        let pop = self.population.blocks().into_iter().map(|b| (SectionKind::Population, b));
        let sug = self.suggestion.blocks().into_iter().map(|b| (SectionKind::Suggestion, b));
        let out = self.outcome.blocks().into_iter().map(|b| (SectionKind::Outcome, b));
        pop.chain(sug).chain(out).collect()
    }
}
