//! Domain types, document validation and expression graphs.

mod expr;
mod types;
mod validate;

pub use expr::{build_expr_graph, normalize_to_dnf, ExprError, ExprGraph, ExprTree, Node, NodeKind, MAX_DNF_DISJUNCTS};
pub use types::*;
pub use validate::{validate, Issue, IssueCode, ValidationReport};
