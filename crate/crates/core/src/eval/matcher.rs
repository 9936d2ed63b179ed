use std::collections::HashMap;

use serde::Serialize;

use super::patient::{LabObservation, PatientRecord, Status};
use super::truth::TruthValue;
use super::EvalError;
use crate::model::{
    build_expr_graph, validate, BlockId, BlockRef, Demographics, DictionaryRef, Disorder, ExprGraph, ExprType,
    Intervention, LabCriterion, NodeKind, Recommendation, TimePeriod,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchConfig {
    /// Overrides the record's own `closed_world` flag.
    pub closed_world_override: Option<bool>,
    /// Treat a unit mismatch as insufficient data instead of comparing anyway.
    pub unit_strict: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { closed_world_override: None, unit_strict: true }
    }
}

impl MatchConfig {
    pub fn closed_world(&self, patient: &PatientRecord) -> bool {
        self.closed_world_override.unwrap_or(patient.closed_world)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub block_id: String,
    pub value: TruthValue,
    pub reason: String,
}

/// A suggested intervention as reported alongside a verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuggestedIntervention {
    pub id: String,
    pub name: String,
    pub concept: Option<String>,
    pub modifier: Option<String>,
    pub grade: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuggestionSummary {
    pub interventions: Vec<SuggestedIntervention>,
    /// Formula over the intervention ids, `COMPARED_TO` included.
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub verdict: TruthValue,
    pub trace: Vec<TraceEntry>,
    /// Present when the verdict is not `False`.
    pub suggestion_summary: Option<SuggestionSummary>,
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Concept ids decide when both sides have one; otherwise folded names must be equal.
fn concept_matches(
    concept: Option<&DictionaryRef>,
    name: &str,
    entry_cui: Option<&str>,
    entry_name: Option<&str>,
) -> bool {
    match (concept, entry_cui) {
        (Some(c), Some(cui)) => c.dict_id.trim().eq_ignore_ascii_case(cui.trim()),
        _ => entry_name.is_some_and(|n| fold(n) == fold(name)),
    }
}

fn status_matches(period: TimePeriod, status: Status) -> bool {
    match period {
        TimePeriod::Unspecified => true,
        TimePeriod::Current => status == Status::Current,
        TimePeriod::Past => status == Status::Past,
    }
}

fn absent(closed_world: bool, what: &str) -> (TruthValue, String) {
    if closed_world {
        (TruthValue::False, format!("no matching {what} (closed world)"))
    } else {
        (TruthValue::Unknown, format!("no matching {what} (open world)"))
    }
}

fn assess_disorder(d: &Disorder, patient: &PatientRecord, closed_world: bool) -> (TruthValue, String) {
    let found = patient.conditions.iter().rev().find(|c| {
        status_matches(d.time_period, c.status)
            && concept_matches(d.concept.as_ref(), &d.name, c.cui.as_deref(), c.name.as_deref())
    });
    let (base, reason) = match found {
        Some(c) if c.negated => (TruthValue::False, format!("patient record denies {} ({})", d.name, c.status)),
        Some(c) => (TruthValue::True, format!("patient has {} ({})", d.name, c.status)),
        None => absent(closed_world, "condition"),
    };
    if d.negation {
        (!base, format!("{reason}; criterion requires absence"))
    } else {
        (base, reason)
    }
}

fn assess_intervention(i: &Intervention, patient: &PatientRecord, closed_world: bool) -> (TruthValue, String) {
    let found = patient.interventions.iter().rev().find(|p| {
        status_matches(i.time_period, p.status)
            && concept_matches(i.concept.as_ref(), &i.name, p.cui.as_deref(), p.name.as_deref())
    });
    match found {
        Some(p) => (TruthValue::True, format!("patient received {} ({})", i.name, p.status)),
        None => absent(closed_world, "intervention"),
    }
}

fn assess_demographics(d: &Demographics, patient: &PatientRecord) -> (TruthValue, String) {
    let pd = &patient.demographics;
    let mut parts = Vec::new();
    let mut value = TruthValue::True;
    if let Some(age) = &d.age {
        let v = match pd.age {
            Some(a) => age.operator.holds(a, &age.value).map_or(TruthValue::Unknown, TruthValue::from),
            None => TruthValue::Unknown,
        };
        parts.push(format!("age {} {}: {v}", age.operator, age.value));
        value = value.and(v);
    }
    let text_fields = [
        ("gender", &d.gender, &pd.gender),
        ("ethnicity", &d.ethnicity, &pd.ethnicity),
        ("country", &d.country, &pd.country),
    ];
    for (label, wanted, actual) in text_fields {
        if let Some(wanted) = wanted {
            let v = match actual {
                Some(a) => TruthValue::from(fold(a) == fold(wanted)),
                None => TruthValue::Unknown,
            };
            parts.push(format!("{label} {wanted}: {v}"));
            value = value.and(v);
        }
    }
    (value, parts.join(", "))
}

fn normalize_unit(u: &str) -> String {
    let u = u.trim().to_lowercase();
    if u == "percent" {
        "%".to_owned()
    } else {
        u
    }
}

/// Compares one observation against a lab criterion. The caller picks an
/// observation with a matching key.
pub fn compare_lab(criterion: &LabCriterion, obs: &LabObservation, cfg: &MatchConfig) -> TruthValue {
    if let (Some(want), Some(got)) = (&criterion.unit, &obs.unit) {
        if cfg.unit_strict && normalize_unit(want) != normalize_unit(got) {
            return TruthValue::Unknown;
        }
    }
    criterion.operator.holds(obs.value, &criterion.value).map_or(TruthValue::Unknown, TruthValue::from)
}

fn assess_lab(l: &LabCriterion, patient: &PatientRecord, cfg: &MatchConfig) -> (TruthValue, String) {
    let obs = patient.labs.iter().rev().find(|o| fold(&o.key) == fold(&l.key));
    match obs {
        Some(o) => {
            let v = compare_lab(l, o, cfg);
            let unit = o.unit.as_deref().map(|u| format!(" {u}")).unwrap_or_default();
            (v, format!("{} = {}{unit} against {} {}", l.key, o.value, l.operator, l.value))
        }
        None => (TruthValue::Unknown, format!("no {} observation", l.key)),
    }
}

/// Truth value of one criterion plus a short explanation.
pub fn assess(block: BlockRef, patient: &PatientRecord, cfg: &MatchConfig) -> (TruthValue, String) {
    let closed_world = cfg.closed_world(patient);
    match block {
        BlockRef::Demographics(d) => assess_demographics(d, patient),
        BlockRef::Disorder(d) => assess_disorder(d, patient, closed_world),
        BlockRef::Intervention(i) => assess_intervention(i, patient, closed_world),
        BlockRef::LabCriterion(l) => assess_lab(l, patient, cfg),
        BlockRef::GeneralOutcome(_) => (TruthValue::Unknown, "outcomes are not criteria".to_owned()),
    }
}

pub fn eval_criterion(block: BlockRef, patient: &PatientRecord, cfg: &MatchConfig) -> TruthValue {
    assess(block, patient, cfg).0
}

/// Bottom-up Kleene evaluation; `leaf` supplies the value of each leaf
/// reachable from the root. An empty graph is `True`.
pub fn eval_graph_with(
    graph: &ExprGraph,
    mut leaf: impl FnMut(&BlockId) -> Option<TruthValue>,
) -> Result<TruthValue, EvalError> {
    let Some(root) = graph.root() else {
        return Ok(TruthValue::True);
    };
    let nodes = graph.nodes();
    let mut reachable = vec![false; nodes.len()];
    reachable[root] = true;
    for i in (0..nodes.len()).rev() {
        if let (true, NodeKind::Op { children, .. }) = (reachable[i], &nodes[i].kind) {
            for &c in children {
                reachable[c] = true;
            }
        }
    }
    let mut values = vec![TruthValue::Unknown; nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        if !reachable[i] {
            continue;
        }
        values[i] = match &node.kind {
            NodeKind::Leaf => {
                let id = node.label.clone().unwrap_or_default();
                leaf(&id).ok_or(EvalError::MissingLeaf(id))?
            }
            NodeKind::Op { op: ExprType::And, children } => TruthValue::all(children.iter().map(|&c| values[c])),
            NodeKind::Op { op: ExprType::Or, children } => TruthValue::any(children.iter().map(|&c| values[c])),
            NodeKind::Op { op: ExprType::ComparedTo, .. } => {
                let label = node.label.as_ref().map_or_else(|| format!("#{i}"), BlockId::to_string);
                return Err(EvalError::ComparisonNode(label));
            }
        };
    }
    Ok(values[root])
}

pub fn eval_graph(graph: &ExprGraph, leaf_values: &HashMap<BlockId, TruthValue>) -> Result<TruthValue, EvalError> {
    eval_graph_with(graph, |id| leaf_values.get(id).copied())
}

/// Leaf values for every population criterion, in canonical block order.
pub fn population_trace(rec: &Recommendation, patient: &PatientRecord, cfg: &MatchConfig) -> Vec<TraceEntry> {
    use crate::model::ExprSection;
    rec.population
        .blocks()
        .into_iter()
        .map(|b| {
            let (value, reason) = assess(b, patient, cfg);
            TraceEntry { block_id: b.id().to_string(), value, reason }
        })
        .collect()
}

fn suggestion_summary(rec: &Recommendation) -> Result<SuggestionSummary, EvalError> {
    let graph = build_expr_graph(&rec.suggestion).map_err(EvalError::Expr)?;
    Ok(SuggestionSummary {
        interventions: rec
            .suggestion
            .interventions
            .iter()
            .map(|i| SuggestedIntervention {
                id: i.id.to_string(),
                name: i.name.clone(),
                concept: i.concept.as_ref().map(|c| c.dict_id.clone()),
                modifier: i.modifier_text.clone(),
                grade: i.grade.clone(),
            })
            .collect(),
        expression: graph.to_string(),
    })
}

/// Decides whether a recommendation's population covers the patient.
pub fn match_recommendation(
    rec: &Recommendation,
    patient: &PatientRecord,
    cfg: &MatchConfig,
) -> Result<MatchResult, EvalError> {
    let report = validate(rec);
    if !report.is_valid() {
        return Err(EvalError::InvalidDocument(report));
    }
    let graph = build_expr_graph(&rec.population).map_err(EvalError::Expr)?;
    let trace = population_trace(rec, patient, cfg);
    let values: HashMap<BlockId, TruthValue> =
        trace.iter().map(|t| (BlockId::new(t.block_id.clone()), t.value)).collect();
    let verdict = eval_graph(&graph, &values)?;
    let suggestion_summary = match verdict {
        TruthValue::False => None,
        _ => Some(suggestion_summary(rec)?),
    };
    Ok(MatchResult { verdict, trace, suggestion_summary })
}
