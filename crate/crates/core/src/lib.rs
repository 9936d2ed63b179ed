//! Clinical recommendations as typed documents.
//!
//! A recommendation is split into a *population* (who it applies to), a
//! *suggestion* (what to do) and an *outcome* (what to expect). Criteria in
//! the population and suggestion are joined by AND/OR expressions, which makes
//! documents both matchable against patient records and indexable by concept.
//!
//! - [`model`]: domain types, validation, expression graphs and DNF
//! - [`serial`]: canonical XML, the JSON mirror and patient-record JSON
//! - [`eval`]: three-valued criterion evaluation and patient matching
//! - [`index`]: faceted retrieval over a corpus of recommendations
//! - [`cli`]: the `crts` command-line interface

pub mod cli;
pub mod eval;
pub mod index;
pub mod model;
pub mod serial;
