use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::expr::{topo_order, ExprError};
use super::types::{
    is_cui_shaped, BlockId, BlockRef, DictionaryRef, ExprSection, ExprType, LabCriterion, NumericConstraint,
    Quantity, Recommendation, SectionKind,
};

/// Stable diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    EmptyDocument,
    InvalidId,
    DuplicateId,
    DanglingRef,
    CycleDetected,
    BadArity,
    ComparisonInPopulation,
    EmptyField,
    InvalidChar,
    EmptyDemographics,
    NegativeAge,
    InvalidRange,
    OperatorValueMismatch,
    NonFiniteValue,
    BadCuiShape,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::EmptyDocument => "EMPTY_DOCUMENT",
            IssueCode::InvalidId => "INVALID_ID",
            IssueCode::DuplicateId => "DUPLICATE_ID",
            IssueCode::DanglingRef => "DANGLING_REF",
            IssueCode::CycleDetected => "CYCLE_DETECTED",
            IssueCode::BadArity => "BAD_ARITY",
            IssueCode::ComparisonInPopulation => "COMPARISON_IN_POPULATION",
            IssueCode::EmptyField => "EMPTY_FIELD",
            IssueCode::InvalidChar => "INVALID_CHAR",
            IssueCode::EmptyDemographics => "EMPTY_DEMOGRAPHICS",
            IssueCode::NegativeAge => "NEGATIVE_AGE",
            IssueCode::InvalidRange => "INVALID_RANGE",
            IssueCode::OperatorValueMismatch => "OPERATOR_VALUE_MISMATCH",
            IssueCode::NonFiniteValue => "NON_FINITE_VALUE",
            IssueCode::BadCuiShape => "BAD_CUI_SHAPE",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub code: IssueCode,
    /// XPath-like location, e.g. `/recommendation/population/disorder[2]/id`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code, self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|i| i.code == code)
    }

    pub fn has_warning(&self, code: IssueCode) -> bool {
        self.warnings.iter().any(|i| i.code == code)
    }

    fn error(&mut self, code: IssueCode, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue { code, path: path.into(), message: message.into() });
    }

    fn warn(&mut self, code: IssueCode, path: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue { code, path: path.into(), message: message.into() });
    }
}

const ROOT: &str = "/recommendation";

/// Checks every document invariant. Violations are returned as data.
pub fn validate(rec: &Recommendation) -> ValidationReport {
    let mut v = Validator { report: ValidationReport::default(), ids: HashMap::new() };

    v.token(&rec.doc_id, &format!("{ROOT}/@id"), "document id");
    if let Some(text) = &rec.source_text {
        v.optional_text(text, &format!("{ROOT}/sourceText"));
    }
    if let Some(source) = &rec.source {
        if let Some(origin) = &source.origin {
            v.optional_text(origin, &format!("{ROOT}/source/origin"));
        }
        for (i, c) in source.citations.iter().enumerate() {
            v.optional_text(c, &format!("{ROOT}/source/citation[{}]", i + 1));
        }
    }

    if rec.population.blocks().is_empty() && rec.suggestion.blocks().is_empty() {
        v.report.error(
            IssueCode::EmptyDocument,
            ROOT,
            "population and suggestion are both empty",
        );
    }

    for kind in SectionKind::ALL {
        let blocks = match kind {
            SectionKind::Population => rec.population.blocks(),
            SectionKind::Suggestion => rec.suggestion.blocks(),
            SectionKind::Outcome => rec.outcome.blocks(),
        };
        let mut counters: HashMap<&'static str, usize> = HashMap::new();
        for block in blocks {
            let n = counters.entry(block.element()).or_default();
            *n += 1;
            let path = format!("{ROOT}/{kind}/{}[{n}]", block.element());
            v.block(block, &path);
        }
    }
    v.exprs(&rec.population, SectionKind::Population);
    v.exprs(&rec.suggestion, SectionKind::Suggestion);

    let mut dups: Vec<(&BlockId, &Vec<String>)> =
        v.ids.iter().filter(|(_, p)| p.len() > 1).map(|(id, p)| (*id, p)).collect();
    dups.sort();
    let mut dup_errors = Vec::new();
    for (id, paths) in dups {
        for path in paths {
            dup_errors.push(Issue {
                code: IssueCode::DuplicateId,
                path: path.clone(),
                message: format!("id \"{id}\" is used {} times", paths.len()),
            });
        }
    }
    v.report.errors.extend(dup_errors);
    v.report
}

struct Validator<'a> {
    report: ValidationReport,
    ids: HashMap<&'a BlockId, Vec<String>>,
}

fn has_illegal_char(s: &str) -> bool {
    s.chars().any(|c| {
        let cp = c as u32;
        (cp < 0x20 && !matches!(c, '\t' | '\n' | '\r')) || (0xFFFE..=0xFFFF).contains(&cp)
    })
}

impl<'a> Validator<'a> {
    fn chars(&mut self, s: &str, path: &str) -> bool {
        if has_illegal_char(s) {
            self.report.error(IssueCode::InvalidChar, path, "contains a character XML cannot carry");
            false
        } else {
            true
        }
    }

    fn required_text(&mut self, s: &str, path: &str) {
        if s.trim().is_empty() {
            self.report.error(IssueCode::EmptyField, path, "required text is empty");
        } else {
            self.chars(s, path);
        }
    }

    fn optional_text(&mut self, s: &str, path: &str) {
        if s.trim().is_empty() {
            self.report.error(IssueCode::EmptyField, path, "present but blank; omit the element instead");
        } else {
            self.chars(s, path);
        }
    }

    fn token(&mut self, s: &str, path: &str, what: &str) {
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            self.report.error(IssueCode::InvalidId, path, format!("{what} {s:?} must be a non-empty token without whitespace"));
        } else {
            self.chars(s, path);
        }
    }

    fn block_id(&mut self, id: &'a BlockId, path: String) {
        self.token(id.as_str(), &path, "id");
        self.ids.entry(id).or_default().push(path);
    }

    fn concept(&mut self, concept: &DictionaryRef, dict_path: &str, id_path: &str) {
        self.required_text(&concept.dictionary, dict_path);
        self.required_text(&concept.dict_id, id_path);
        if concept.is_umls() && !concept.dict_id.trim().is_empty() && !is_cui_shaped(&concept.dict_id) {
            self.report.warn(
                IssueCode::BadCuiShape,
                id_path,
                format!("{:?} does not look like a UMLS CUI (C followed by 7 digits)", concept.dict_id),
            );
        }
    }

    fn quantity(&mut self, q: &Quantity, path: &str) -> bool {
        if !q.is_finite() {
            self.report.error(IssueCode::NonFiniteValue, path, "value must be finite");
            return false;
        }
        if let Quantity::Range { low, high } = *q {
            if low > high {
                self.report.error(IssueCode::InvalidRange, path, format!("range {low}..{high} has low > high"));
                return false;
            }
        }
        true
    }

    fn operator_shape(&mut self, c: &NumericConstraint, path: &str) {
        let in_range = c.operator == super::types::Comparator::InRange;
        if in_range != c.value.is_range() {
            self.report.error(
                IssueCode::OperatorValueMismatch,
                path,
                format!("operator {:?} does not fit value {}", c.operator.token(), c.value),
            );
        }
    }

    fn lab(&mut self, lab: &'a LabCriterion, path: &str) {
        self.block_id(&lab.id, format!("{path}/id"));
        self.required_text(&lab.key, &format!("{path}/key"));
        self.quantity(&lab.value, &format!("{path}/value"));
        self.operator_shape(&NumericConstraint { operator: lab.operator, value: lab.value }, &format!("{path}/operator"));
        if let Some(unit) = &lab.unit {
            self.optional_text(unit, &format!("{path}/unit"));
        }
        if let Some(t) = &lab.temporal {
            self.optional_text(t, &format!("{path}/temporal"));
        }
    }

    fn block(&mut self, block: BlockRef<'a>, path: &str) {
        match block {
            BlockRef::Demographics(d) => {
                self.block_id(&d.id, format!("{path}/id"));
                if d.age.is_none() && d.gender.is_none() && d.ethnicity.is_none() && d.country.is_none() {
                    self.report.error(IssueCode::EmptyDemographics, path, "no demographic attribute is present");
                }
                if let Some(age) = &d.age {
                    let age_path = format!("{path}/age");
                    if self.quantity(&age.value, &age_path) {
                        let negative = match age.value {
                            Quantity::Scalar(v) => v < 0.0,
                            Quantity::Range { low, .. } => low < 0.0,
                        };
                        if negative {
                            self.report.error(IssueCode::NegativeAge, &age_path, "age must be >= 0");
                        }
                    }
                    self.operator_shape(age, &age_path);
                }
                for (name, value) in [("gender", &d.gender), ("ethnicity", &d.ethnicity), ("country", &d.country)] {
                    if let Some(value) = value {
                        self.optional_text(value, &format!("{path}/{name}"));
                    }
                }
            }
            BlockRef::Disorder(d) => {
                self.block_id(&d.id, format!("{path}/id"));
                self.required_text(&d.name, &format!("{path}/name"));
                if let Some(c) = &d.concept {
                    let id_path = if c.is_umls() { format!("{path}/UMLSDictId") } else { format!("{path}/dictId") };
                    self.concept(c, &format!("{path}/dictionary"), &id_path);
                }
            }
            BlockRef::Intervention(i) => {
                self.block_id(&i.id, format!("{path}/id"));
                self.required_text(&i.name, &format!("{path}/name"));
                if let Some(c) = &i.concept {
                    self.concept(c, &format!("{path}/dictionary"), &format!("{path}/dictId"));
                }
                for (name, value) in
                    [("type", &i.intervention_type), ("modifierText", &i.modifier_text), ("grade", &i.grade)]
                {
                    if let Some(value) = value {
                        self.optional_text(value, &format!("{path}/{name}"));
                    }
                }
                if let Some(g) = &i.grade {
                    if g.chars().any(char::is_whitespace) {
                        self.report.error(IssueCode::InvalidId, format!("{path}/grade"), "grade must be a single token");
                    }
                }
            }
            BlockRef::LabCriterion(l) => self.lab(l, path),
            BlockRef::GeneralOutcome(o) => {
                self.block_id(&o.id, format!("{path}/id"));
                self.required_text(&o.outcome_text, &format!("{path}/outcomeText"));
            }
        }
    }

    fn exprs<S: ExprSection>(&mut self, section: &'a S, kind: SectionKind) {
        let blocks: Vec<&str> = section.blocks().iter().map(|b| b.id().as_str()).collect();
        let outputs: Vec<&str> = section.exprs().iter().map(|e| e.output.as_str()).collect();
        let mut dangling = false;
        for (n, e) in section.exprs().iter().enumerate() {
            let path = format!("{ROOT}/{kind}/expr[{}]", n + 1);
            self.block_id(&e.output, format!("{path}/outputConceptId"));
            match e.expr_type {
                ExprType::And | ExprType::Or if e.inputs.len() < 2 => self.report.error(
                    IssueCode::BadArity,
                    &path,
                    format!("{} needs at least 2 inputs, has {}", e.expr_type, e.inputs.len()),
                ),
                ExprType::ComparedTo if e.inputs.len() != 2 => self.report.error(
                    IssueCode::BadArity,
                    &path,
                    format!("COMPARED_TO needs exactly 2 inputs, has {}", e.inputs.len()),
                ),
                _ => {}
            }
            if e.expr_type == ExprType::ComparedTo && kind == SectionKind::Population {
                self.report.error(
                    IssueCode::ComparisonInPopulation,
                    format!("{path}/@type"),
                    "COMPARED_TO is only allowed in the suggestion section",
                );
            }
            for input in &e.inputs {
                let s = input.as_str();
                if !blocks.contains(&s) && !outputs.contains(&s) {
                    dangling = true;
                    self.report.error(
                        IssueCode::DanglingRef,
                        format!("{path}/inputConceptId"),
                        format!("input {s:?} names no block or expression output in the {kind} section"),
                    );
                }
            }
        }
        if !dangling {
            if let Err(ExprError::CycleDetected(at)) = topo_order(section) {
                let n = section.exprs().iter().position(|e| e.output == at).unwrap_or(0);
                self.report.error(
                    IssueCode::CycleDetected,
                    format!("{ROOT}/{kind}/expr[{}]", n + 1),
                    format!("expression {at} depends on itself"),
                );
            }
        }
    }
}
