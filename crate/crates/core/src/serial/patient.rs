//! Patient-record JSON.

use serde::{Deserialize, Serialize};

use super::SerialError;
use crate::eval::{Condition, LabObservation, PatientDemographics, PatientIntervention, PatientRecord, Status};

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RecordWire {
    #[serde(default)]
    demographics: DemographicsWire,
    #[serde(default)]
    conditions: Vec<ConditionWire>,
    #[serde(default)]
    interventions: Vec<InterventionWire>,
    #[serde(default)]
    labs: Vec<LabWire>,
    #[serde(default)]
    closed_world: bool,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DemographicsWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    age: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ethnicity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    country: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cui: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status: Option<String>,
    #[serde(default)]
    negated: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterventionWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cui: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabWire {
    key: String,
    value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observed_at: Option<String>,
}

fn status(raw: Option<String>, path: String) -> Result<Status, SerialError> {
    match raw {
        Some(s) => s.parse().map_err(|m| SerialError::value(path, m)),
        None => Ok(Status::Current),
    }
}

fn identified(cui: &Option<String>, name: &Option<String>, path: &str) -> Result<(), SerialError> {
    if cui.is_none() && name.is_none() {
        return Err(SerialError::schema(path, "entry needs a cui or a name"));
    }
    Ok(())
}

/// Parses a patient record. A missing status means `current`; a missing
/// `closed_world` means open world.
pub fn parse_patient_json(input: &[u8]) -> Result<PatientRecord, SerialError> {
    let body = input.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(input);
    let wire: RecordWire = serde_json::from_slice(body).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => SerialError::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()),
            _ => SerialError::JsonMalformed(e.to_string()),
        }
    })?;

    if let Some(age) = wire.demographics.age {
        if !(age >= 0.0 && age.is_finite()) {
            return Err(SerialError::value("/demographics/age", format!("age must be non-negative, found {age}")));
        }
    }
    let mut conditions = Vec::with_capacity(wire.conditions.len());
    for (i, c) in wire.conditions.into_iter().enumerate() {
        let path = format!("/conditions/{i}");
        identified(&c.cui, &c.name, &path)?;
        conditions.push(Condition {
            status: status(c.status, format!("{path}/status"))?,
            cui: c.cui,
            name: c.name,
            negated: c.negated,
        });
    }
    let mut interventions = Vec::with_capacity(wire.interventions.len());
    for (i, p) in wire.interventions.into_iter().enumerate() {
        let path = format!("/interventions/{i}");
        identified(&p.cui, &p.name, &path)?;
        interventions.push(PatientIntervention { status: status(p.status, format!("{path}/status"))?, cui: p.cui, name: p.name });
    }
    let labs = wire
        .labs
        .into_iter()
        .map(|l| LabObservation { key: l.key, value: l.value, unit: l.unit, observed_at: l.observed_at })
        .collect();
    let d = wire.demographics;
    Ok(PatientRecord {
        demographics: PatientDemographics { age: d.age, gender: d.gender, ethnicity: d.ethnicity, country: d.country },
        conditions,
        interventions,
        labs,
        closed_world: wire.closed_world,
    })
}

pub fn write_patient_json(p: &PatientRecord) -> String {
    let d = &p.demographics;
    let wire = RecordWire {
        demographics: DemographicsWire {
            age: d.age,
            gender: d.gender.clone(),
            ethnicity: d.ethnicity.clone(),
            country: d.country.clone(),
        },
        conditions: p
            .conditions
            .iter()
            .map(|c| ConditionWire {
                cui: c.cui.clone(),
                name: c.name.clone(),
                status: Some(c.status.as_str().to_owned()),
                negated: c.negated,
            })
            .collect(),
        interventions: p
            .interventions
            .iter()
            .map(|i| InterventionWire { cui: i.cui.clone(), name: i.name.clone(), status: Some(i.status.as_str().to_owned()) })
            .collect(),
        labs: p
            .labs
            .iter()
            .map(|l| LabWire { key: l.key.clone(), value: l.value, unit: l.unit.clone(), observed_at: l.observed_at.clone() })
            .collect(),
        closed_world: p.closed_world,
    };
    let value = serde_json::to_value(wire).expect("wire types always serialize");
    let mut out = serde_json::to_string_pretty(&value).expect("values always serialize");
    out.push('\n');
    out
}
