use std::fmt;
use std::str::FromStr;

/// Status of a patient's condition or intervention entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Status {
    #[default]
    Current,
    Past,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Current => "current",
            Status::Past => "past",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "current" => Ok(Status::Current),
            "past" => Ok(Status::Past),
            _ => Err(format!("status must be \"current\" or \"past\", found {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatientDemographics {
    /// Age in years.
    pub age: Option<f64>,
    pub gender: Option<String>,
    pub ethnicity: Option<String>,
    pub country: Option<String>,
}

/// A diagnosis entry. `negated` records an explicit finding of absence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Condition {
    pub cui: Option<String>,
    pub name: Option<String>,
    pub status: Status,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatientIntervention {
    pub cui: Option<String>,
    pub name: Option<String>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabObservation {
    pub key: String,
    pub value: f64,
    pub unit: Option<String>,
    pub observed_at: Option<String>,
}

impl LabObservation {
    pub fn new(key: impl Into<String>, value: f64, unit: Option<&str>) -> Self {
        LabObservation { key: key.into(), value, unit: unit.map(str::to_owned), observed_at: None }
    }
}

/// The facts known about one patient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatientRecord {
    pub demographics: PatientDemographics,
    pub conditions: Vec<Condition>,
    pub interventions: Vec<PatientIntervention>,
    pub labs: Vec<LabObservation>,
    /// When set, a condition or intervention missing from the record is taken as absent.
    pub closed_world: bool,
}

impl Condition {
    pub fn cui(cui: &str, status: Status) -> Self {
        Condition { cui: Some(cui.to_owned()), name: None, status, negated: false }
    }
}

impl PatientIntervention {
    pub fn cui(cui: &str, status: Status) -> Self {
        PatientIntervention { cui: Some(cui.to_owned()), name: None, status }
    }

    pub fn named(name: &str, status: Status) -> Self {
        PatientIntervention { cui: None, name: Some(name.to_owned()), status }
    }
}
