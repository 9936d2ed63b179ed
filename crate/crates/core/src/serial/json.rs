//! CRTS-JSON, a field-for-field mirror of CRTS-XML.
//!
//! Keys are written sorted with two-space indentation and a trailing newline.
//! Every section array is always present; absent optional scalars are `null`.

use serde::{Deserialize, Serialize};

use super::{ensure_nonempty, ensure_valid, SerialError};
use crate::model::{
    BlockId, Comparator, Demographics, DictionaryRef, Disorder, ExprNode, ExprType, GeneralOutcome, Intervention,
    LabCriterion, NumericConstraint, Outcome, Population, Quantity, Recommendation, Source, Suggestion, TimePeriod,
};

type Result<T> = std::result::Result<T, SerialError>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocWire {
    id: String,
    #[serde(rename = "sourceText", default)]
    source_text: Option<String>,
    #[serde(default)]
    source: Option<SourceWire>,
    #[serde(default)]
    population: PopulationWire,
    #[serde(default)]
    suggestion: SuggestionWire,
    #[serde(default)]
    outcome: OutcomeWire,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceWire {
    #[serde(default)]
    origin: Option<String>,
    #[serde(rename = "citation", default)]
    citations: Vec<String>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PopulationWire {
    #[serde(default)]
    demographics: Vec<DemographicsWire>,
    #[serde(default)]
    disorder: Vec<DisorderWire>,
    #[serde(default)]
    intervention: Vec<InterventionWire>,
    #[serde(rename = "labResults", default)]
    lab_results: Vec<LabWire>,
    #[serde(default)]
    expr: Vec<ExprWire>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SuggestionWire {
    #[serde(default)]
    intervention: Vec<InterventionWire>,
    #[serde(default)]
    expr: Vec<ExprWire>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutcomeWire {
    #[serde(rename = "generalOutcome", default)]
    general_outcome: Vec<GeneralWire>,
    #[serde(rename = "labResults", default)]
    lab_results: Vec<LabWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgeWire {
    operator: String,
    value: QuantityWire,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemographicsWire {
    id: String,
    #[serde(default)]
    age: Option<AgeWire>,
    #[serde(default)]
    gender: Option<String>,
    #[serde(default)]
    ethnicity: Option<String>,
    #[serde(default)]
    country: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisorderWire {
    id: String,
    name: String,
    #[serde(rename = "UMLSDictId", default, skip_serializing)]
    umls_dict_id: Option<String>,
    #[serde(default)]
    dictionary: Option<String>,
    #[serde(rename = "dictId", default)]
    dict_id: Option<String>,
    #[serde(default)]
    timeperiod: Option<String>,
    #[serde(default)]
    negation: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterventionWire {
    id: String,
    name: String,
    #[serde(rename = "type", default)]
    intervention_type: Option<String>,
    #[serde(rename = "UMLSDictId", default, skip_serializing)]
    umls_dict_id: Option<String>,
    #[serde(default)]
    dictionary: Option<String>,
    #[serde(rename = "dictId", default)]
    dict_id: Option<String>,
    #[serde(default)]
    timeperiod: Option<String>,
    #[serde(rename = "modifierText", default)]
    modifier_text: Option<String>,
    #[serde(default)]
    grade: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabWire {
    id: String,
    key: String,
    value: QuantityWire,
    #[serde(default)]
    unit: Option<String>,
    operator: String,
    #[serde(default)]
    temporal: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneralWire {
    id: String,
    #[serde(rename = "outcomeText")]
    outcome_text: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExprWire {
    #[serde(rename = "type")]
    expr_type: String,
    #[serde(rename = "inputConceptId")]
    inputs: Vec<String>,
    #[serde(rename = "outputConceptId")]
    output: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QuantityWire {
    Scalar(f64),
    Range { low: f64, high: f64 },
}

pub fn parse_json(input: &[u8]) -> Result<Recommendation> {
    let body = input.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(input);
    let wire: DocWire = serde_json::from_slice(body).map_err(classify)?;
    wire.into_model()
}

fn classify(e: serde_json::Error) -> SerialError {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => SerialError::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()),
        Category::Syntax | Category::Eof | Category::Io => SerialError::JsonMalformed(e.to_string()),
    }
}

/// The CRTS-JSON value of a document, without validating it.
pub(crate) fn json_value(rec: &Recommendation) -> serde_json::Value {
    serde_json::to_value(DocWire::from_model(rec)).expect("wire types always serialize")
}

/// Serializes a valid document to canonical CRTS-JSON.
pub fn write_json(rec: &Recommendation) -> Result<String> {
    ensure_valid(rec)?;
    let value = json_value(rec);
    let mut out = serde_json::to_string_pretty(&value).expect("values always serialize");
    out.push('\n');
    Ok(out)
}

fn operator(raw: &str, path: String) -> Result<Comparator> {
    Comparator::parse_token(raw).ok_or_else(|| SerialError::value(path, format!("unknown operator {raw:?}")))
}

fn time_period(raw: Option<String>, path: String) -> Result<TimePeriod> {
    match raw {
        Some(s) => s.parse().map_err(|m| SerialError::value(path, m)),
        None => Ok(TimePeriod::Unspecified),
    }
}

fn concept(umls: Option<String>, dictionary: Option<String>, dict_id: Option<String>, path: &str) -> Result<Option<DictionaryRef>> {
    match (umls, dictionary, dict_id) {
        (None, None, None) => Ok(None),
        (Some(cui), None, None) => Ok(Some(DictionaryRef::umls(cui))),
        (None, Some(d), Some(id)) => Ok(Some(DictionaryRef::new(d, id))),
        (Some(_), _, _) => Err(SerialError::schema(path, "UMLSDictId cannot be combined with another dictionary")),
        _ => Err(SerialError::schema(path, "dictionary and dictId must appear together")),
    }
}

impl QuantityWire {
    fn into_model(self, path: String) -> Result<Quantity> {
        let q = match self {
            QuantityWire::Scalar(v) => Quantity::Scalar(v),
            QuantityWire::Range { low, high } => Quantity::Range { low, high },
        };
        if !q.is_finite() {
            return Err(SerialError::value(path, "value is not finite"));
        }
        Ok(q)
    }

    fn from_model(q: Quantity) -> Self {
        match q {
            Quantity::Scalar(v) => QuantityWire::Scalar(v),
            Quantity::Range { low, high } => QuantityWire::Range { low, high },
        }
    }
}

impl DocWire {
    fn into_model(self) -> Result<Recommendation> {
        let population = self.population.into_model()?;
        let suggestion = self.suggestion.into_model()?;
        let outcome = self.outcome.into_model()?;
        ensure_nonempty(&population, &suggestion, "")?;
        Ok(Recommendation {
            doc_id: self.id,
            source_text: self.source_text,
            source: self.source.map(|s| Source { origin: s.origin, citations: s.citations }),
            population,
            suggestion,
            outcome,
        })
    }

    fn from_model(rec: &Recommendation) -> Self {
        DocWire {
            id: rec.doc_id.clone(),
            source_text: rec.source_text.clone(),
            source: rec.source.as_ref().map(|s| SourceWire { origin: s.origin.clone(), citations: s.citations.clone() }),
            population: PopulationWire {
                demographics: rec.population.demographics.iter().map(DemographicsWire::from_model).collect(),
                disorder: rec.population.disorders.iter().map(DisorderWire::from_model).collect(),
                intervention: rec.population.interventions.iter().map(InterventionWire::from_model).collect(),
                lab_results: rec.population.lab_criteria.iter().map(LabWire::from_model).collect(),
                expr: rec.population.exprs.iter().map(ExprWire::from_model).collect(),
            },
            suggestion: SuggestionWire {
                intervention: rec.suggestion.interventions.iter().map(InterventionWire::from_model).collect(),
                expr: rec.suggestion.exprs.iter().map(ExprWire::from_model).collect(),
            },
            outcome: OutcomeWire {
                general_outcome: rec
                    .outcome
                    .general
                    .iter()
                    .map(|g| GeneralWire { id: g.id.to_string(), outcome_text: g.outcome_text.clone() })
                    .collect(),
                lab_results: rec.outcome.lab_criteria.iter().map(LabWire::from_model).collect(),
            },
        }
    }
}

fn collect<W, T>(items: Vec<W>, base: &str, f: impl Fn(W, String) -> Result<T>) -> Result<Vec<T>> {
    items.into_iter().enumerate().map(|(i, w)| f(w, format!("{base}/{i}"))).collect()
}

impl PopulationWire {
    fn into_model(self) -> Result<Population> {
        Ok(Population {
            demographics: collect(self.demographics, "/population/demographics", DemographicsWire::into_model)?,
            disorders: collect(self.disorder, "/population/disorder", DisorderWire::into_model)?,
            interventions: collect(self.intervention, "/population/intervention", InterventionWire::into_model)?,
            lab_criteria: collect(self.lab_results, "/population/labResults", LabWire::into_model)?,
            exprs: collect(self.expr, "/population/expr", ExprWire::into_model)?,
        })
    }
}

impl SuggestionWire {
    fn into_model(self) -> Result<Suggestion> {
        Ok(Suggestion {
            interventions: collect(self.intervention, "/suggestion/intervention", InterventionWire::into_model)?,
            exprs: collect(self.expr, "/suggestion/expr", ExprWire::into_model)?,
        })
    }
}

impl OutcomeWire {
    fn into_model(self) -> Result<Outcome> {
        Ok(Outcome {
            general: self
                .general_outcome
                .into_iter()
                .map(|g| GeneralOutcome { id: BlockId::new(g.id), outcome_text: g.outcome_text })
                .collect(),
            lab_criteria: collect(self.lab_results, "/outcome/labResults", LabWire::into_model)?,
        })
    }
}

impl DemographicsWire {
    fn into_model(self, path: String) -> Result<Demographics> {
        let age = match self.age {
            Some(a) => Some(NumericConstraint {
                operator: operator(&a.operator, format!("{path}/age/operator"))?,
                value: a.value.into_model(format!("{path}/age/value"))?,
            }),
            None => None,
        };
        Ok(Demographics {
            id: BlockId::new(self.id),
            age,
            gender: self.gender,
            ethnicity: self.ethnicity,
            country: self.country,
        })
    }

    fn from_model(d: &Demographics) -> Self {
        DemographicsWire {
            id: d.id.to_string(),
            age: d.age.map(|a| AgeWire { operator: a.operator.token().to_owned(), value: QuantityWire::from_model(a.value) }),
            gender: d.gender.clone(),
            ethnicity: d.ethnicity.clone(),
            country: d.country.clone(),
        }
    }
}

impl DisorderWire {
    fn into_model(self, path: String) -> Result<Disorder> {
        Ok(Disorder {
            id: BlockId::new(self.id),
            name: self.name,
            concept: concept(self.umls_dict_id, self.dictionary, self.dict_id, &path)?,
            time_period: time_period(self.timeperiod, format!("{path}/timeperiod"))?,
            negation: self.negation.unwrap_or(false),
        })
    }

    fn from_model(d: &Disorder) -> Self {
        DisorderWire {
            id: d.id.to_string(),
            name: d.name.clone(),
            umls_dict_id: None,
            dictionary: d.concept.as_ref().map(|c| c.dictionary.clone()),
            dict_id: d.concept.as_ref().map(|c| c.dict_id.clone()),
            timeperiod: Some(d.time_period.as_str().to_owned()),
            negation: Some(d.negation),
        }
    }
}

impl InterventionWire {
    fn into_model(self, path: String) -> Result<Intervention> {
        Ok(Intervention {
            id: BlockId::new(self.id),
            name: self.name,
            intervention_type: self.intervention_type,
            concept: concept(self.umls_dict_id, self.dictionary, self.dict_id, &path)?,
            time_period: time_period(self.timeperiod, format!("{path}/timeperiod"))?,
            modifier_text: self.modifier_text,
            grade: self.grade,
        })
    }

    fn from_model(i: &Intervention) -> Self {
        InterventionWire {
            id: i.id.to_string(),
            name: i.name.clone(),
            intervention_type: i.intervention_type.clone(),
            umls_dict_id: None,
            dictionary: i.concept.as_ref().map(|c| c.dictionary.clone()),
            dict_id: i.concept.as_ref().map(|c| c.dict_id.clone()),
            timeperiod: Some(i.time_period.as_str().to_owned()),
            modifier_text: i.modifier_text.clone(),
            grade: i.grade.clone(),
        }
    }
}

impl LabWire {
    fn into_model(self, path: String) -> Result<LabCriterion> {
        Ok(LabCriterion {
            id: BlockId::new(self.id),
            operator: operator(&self.operator, format!("{path}/operator"))?,
            value: self.value.into_model(format!("{path}/value"))?,
            key: self.key,
            unit: self.unit,
            temporal: self.temporal,
        })
    }

    fn from_model(l: &LabCriterion) -> Self {
        LabWire {
            id: l.id.to_string(),
            key: l.key.clone(),
            value: QuantityWire::from_model(l.value),
            unit: l.unit.clone(),
            operator: l.operator.token().to_owned(),
            temporal: l.temporal.clone(),
        }
    }
}

impl ExprWire {
    fn into_model(self, path: String) -> Result<ExprNode> {
        let expr_type: ExprType = self.expr_type.parse().map_err(|m| SerialError::value(format!("{path}/type"), m))?;
        Ok(ExprNode::new(expr_type, self.inputs, self.output))
    }

    fn from_model(e: &ExprNode) -> Self {
        ExprWire {
            expr_type: e.expr_type.as_str().to_owned(),
            inputs: e.inputs.iter().map(BlockId::to_string).collect(),
            output: e.output.to_string(),
        }
    }
}
