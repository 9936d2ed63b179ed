//! Wire formats: canonical CRTS-XML, the CRTS-JSON mirror, and patient-record JSON.

mod json;
mod patient;
mod xml;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ExprSection, Population, Recommendation, Suggestion, ValidationReport};

pub(crate) use json::json_value;
pub use json::{parse_json, write_json};
pub use patient::{parse_patient_json, write_patient_json};
pub use xml::{parse_xml, write_xml};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SerialError {
    #[error("malformed XML: {0}")]
    XmlMalformed(String),
    #[error("malformed JSON: {0}")]
    JsonMalformed(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("cannot parse value at {path}: {message}")]
    ValueParse { path: String, message: String },
    #[error("document is invalid ({} errors)", .0.errors.len())]
    InvalidDocument(ValidationReport),
    #[error("input is neither XML nor JSON")]
    UnrecognizedFormat,
}

impl SerialError {
    pub fn code(&self) -> &'static str {
        match self {
            SerialError::XmlMalformed(_) => "XML_MALFORMED",
            SerialError::JsonMalformed(_) => "JSON_MALFORMED",
            SerialError::SchemaViolation { .. } => "SCHEMA_VIOLATION",
            SerialError::ValueParse { .. } => "VALUE_PARSE",
            SerialError::InvalidDocument(_) => "INVALID_DOCUMENT",
            SerialError::UnrecognizedFormat => "UNRECOGNIZED_FORMAT",
        }
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        SerialError::SchemaViolation { path: path.into(), message: message.into() }
    }

    pub(crate) fn value(path: impl Into<String>, message: impl Into<String>) -> Self {
        SerialError::ValueParse { path: path.into(), message: message.into() }
    }
}

/// Whether unknown elements abort parsing or only produce warnings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

/// Something the lenient parser skipped over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDocument {
    pub recommendation: Recommendation,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xml,
    Json,
}

impl Format {
    /// Sniffs the format from the first significant byte.
    pub fn detect(input: &[u8]) -> Option<Format> {
        let body = input.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(input);
        match body.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'<') => Some(Format::Xml),
            Some(b'{') => Some(Format::Json),
            _ => None,
        }
    }
}

/// Parses either format, picked by [`Format::detect`].
pub fn parse_document(input: &[u8], mode: ParseMode) -> Result<ParsedDocument, SerialError> {
    match Format::detect(input) {
        Some(Format::Xml) => parse_xml(input, mode),
        Some(Format::Json) => {
            parse_json(input).map(|recommendation| ParsedDocument { recommendation, warnings: Vec::new() })
        }
        None => Err(SerialError::UnrecognizedFormat),
    }
}

pub fn write_document(rec: &Recommendation, format: Format) -> Result<String, SerialError> {
    match format {
        Format::Xml => write_xml(rec),
        Format::Json => write_json(rec),
    }
}

fn ensure_valid(rec: &Recommendation) -> Result<(), SerialError> {
    let report = crate::model::validate(rec);
    if report.is_valid() {
        Ok(())
    } else {
        Err(SerialError::InvalidDocument(report))
    }
}

/// A document needs at least one population or suggestion block.
fn ensure_nonempty(population: &Population, suggestion: &Suggestion, path: &str) -> Result<(), SerialError> {
    if population.blocks().is_empty() && suggestion.blocks().is_empty() {
        return Err(SerialError::schema(path, "document has neither population nor suggestion blocks"));
    }
    Ok(())
}
