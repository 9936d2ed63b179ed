//! Query text grammar.
//!
//! ```text
//! query    := conjunct (" AND " conjunct)*
//! conjunct := section "." element "." field "=" value
//!           | "population.lab." key op number
//! op       := "<" | "<=" | ">" | ">=" | "="
//! ```
//!
//! Values and lab keys may be double-quoted (`\"` and `\\` escape inside quotes).

use super::{Conjunct, Facet, IndexError, IndexKey, LabConstraint, Query};
use crate::model::{parse_number, Comparator, SectionKind};

fn syntax(msg: impl Into<String>) -> IndexError {
    IndexError::QuerySyntax(msg.into())
}

/// Splits on `AND` surrounded by whitespace, ignoring quoted text.
fn split_conjuncts(text: &str) -> Result<Vec<&str>, IndexError> {
    let bytes = text.as_bytes();
    let mut parts = Vec::new();
    let mut start = 0;
    let mut in_quotes = false;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if in_quotes => i += 1,
            b'"' => in_quotes = !in_quotes,
            b if b.is_ascii_whitespace() && !in_quotes => {
                let rest = &bytes[i + 1..];
                if rest.starts_with(b"AND") && rest.get(3).is_some_and(u8::is_ascii_whitespace) {
                    parts.push(&text[start..i]);
                    i += 4;
                    start = i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    if in_quotes {
        return Err(syntax("unterminated quote"));
    }
    parts.push(&text[start.min(text.len())..]);
    Ok(parts)
}

fn unquote(raw: &str) -> Result<String, IndexError> {
    let raw = raw.trim();
    let Some(inner) = raw.strip_prefix('"') else {
        if raw.contains('"') {
            return Err(syntax(format!("stray quote in {raw:?}")));
        }
        return Ok(raw.to_owned());
    };
    let inner = inner.strip_suffix('"').ok_or_else(|| syntax(format!("unterminated quote in {raw:?}")))?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.push(chars.next().ok_or_else(|| syntax("dangling escape"))?),
            '"' => return Err(syntax(format!("stray quote in {raw:?}"))),
            c => out.push(c),
        }
    }
    Ok(out)
}

fn section(s: &str) -> Option<SectionKind> {
    SectionKind::ALL.into_iter().find(|k| k.as_str() == s)
}

/// Maps `element.field` under `section` to a facet.
fn facet(section: SectionKind, element: &str, field: &str) -> Option<Facet> {
    use SectionKind::*;
    Some(match (section, element, field) {
        (Population, "disorder", "cui") => Facet::ConceptId,
        (Population, "disorder", "name") => Facet::ConceptName,
        (Population, "disorder", "negated") => Facet::DisorderNegated,
        (Population | Suggestion, "intervention", "cui") => Facet::ConceptId,
        (Population | Suggestion, "intervention", "name") => Facet::ConceptName,
        (Population | Suggestion, "intervention", "type") => Facet::InterventionType,
        (Population | Outcome, "lab", "key") => Facet::LabKey,
        (Outcome, "outcome", "name") => Facet::ConceptName,
        _ => return None,
    })
}

/// Byte offset just past the closing quote of a quoted prefix.
fn quoted_len(s: &str) -> Result<usize, IndexError> {
    let bytes = s.as_bytes();
    let mut i = 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 1,
            b'"' => return Ok(i + 1),
            _ => {}
        }
        i += 1;
    }
    Err(syntax(format!("unterminated quote in {s:?}")))
}

fn lab_constraint(rest: &str) -> Result<Conjunct, IndexError> {
    let rest = rest.trim_start();
    let (key, pos) = if rest.starts_with('"') {
        let end = quoted_len(rest)?;
        (unquote(&rest[..end])?, end + (rest[end..].len() - rest[end..].trim_start().len()))
    } else {
        let pos = rest
            .find(['<', '>', '='])
            .ok_or_else(|| syntax(format!("expected an operator after lab key in {rest:?}")))?;
        let key = rest[..pos].trim();
        if key.contains(['!', '"']) {
            return Err(syntax(format!("unsupported operator in {rest:?}")));
        }
        (key.to_owned(), pos)
    };
    if key.trim().is_empty() {
        return Err(syntax("empty lab key"));
    }
    if !rest[pos..].starts_with(['<', '>', '=']) {
        return Err(syntax(format!("expected an operator after lab key in {rest:?}")));
    }
    let tail = &rest[pos..];
    let (operator, number) = [("<=", Comparator::Le), (">=", Comparator::Ge), ("<", Comparator::Lt), (">", Comparator::Gt), ("=", Comparator::Eq)]
        .into_iter()
        .find_map(|(tok, op)| tail.strip_prefix(tok).map(|n| (op, n)))
        .expect("tail starts with an operator character");
    let value = parse_number(number).map_err(syntax)?;
    Ok(Conjunct {
        key: IndexKey::new(SectionKind::Population, Facet::LabKey, &key),
        lab: Some(LabConstraint { operator, value }),
    })
}

fn conjunct(text: &str) -> Result<Conjunct, IndexError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(syntax("empty conjunct"));
    }
    if let Some(rest) = text.strip_prefix("population.lab.") {
        let is_facet_form = rest.strip_prefix("key").is_some_and(|r| r.trim_start().starts_with('='));
        if !is_facet_form {
            return lab_constraint(rest);
        }
    }
    let (path, raw_value) = text.split_once('=').ok_or_else(|| syntax(format!("expected path=value in {text:?}")))?;
    let parts: Vec<&str> = path.trim().split('.').collect();
    let [sec, element, field] = parts[..] else {
        return Err(syntax(format!("path {:?} must be section.element.field", path.trim())));
    };
    let section = section(sec).ok_or_else(|| syntax(format!("unknown section {sec:?}")))?;
    let facet = facet(section, element, field)
        .ok_or_else(|| syntax(format!("{element}.{field} is not a field of the {section} section")))?;
    let value = unquote(raw_value)?;
    if value.trim().is_empty() {
        return Err(syntax(format!("empty value for {}", path.trim())));
    }
    Ok(Conjunct { key: IndexKey::new(section, facet, &value), lab: None })
}

pub fn parse_query(text: &str) -> Result<Query, IndexError> {
    if text.trim().is_empty() {
        return Err(syntax("empty query"));
    }
    let conjuncts = split_conjuncts(text)?.into_iter().map(conjunct).collect::<Result<_, _>>()?;
    Ok(Query { conjuncts })
}
