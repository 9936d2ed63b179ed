//! Three-valued evaluation of population logic and patient matching.

mod matcher;
mod patient;
mod truth;

use thiserror::Error;

use crate::model::{BlockId, ExprError, ValidationReport};

pub use matcher::{
    assess, compare_lab, eval_criterion, eval_graph, eval_graph_with, match_recommendation, population_trace,
    MatchConfig, MatchResult, SuggestedIntervention, SuggestionSummary, TraceEntry,
};
pub use patient::{Condition, LabObservation, PatientDemographics, PatientIntervention, PatientRecord, Status};
pub use truth::TruthValue;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no value for leaf {0}")]
    MissingLeaf(BlockId),
    #[error("COMPARED_TO node {0} cannot be evaluated")]
    ComparisonNode(String),
    #[error("document is invalid ({} errors)", .0.errors.len())]
    InvalidDocument(ValidationReport),
    #[error(transparent)]
    Expr(ExprError),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::MissingLeaf(_) => "MISSING_LEAF",
            EvalError::ComparisonNode(_) => "COMPARISON_NODE",
            EvalError::InvalidDocument(_) => "INVALID_DOCUMENT",
            EvalError::Expr(e) => e.code(),
        }
    }
}
