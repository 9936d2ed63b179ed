//! On-disk index: a `CRTSIDX 1` header line followed by JSON lines, first
//! one `{"doc": ...}` per document in id order, then one posting per key in
//! key order. Loading rebuilds the postings from the documents and rejects
//! the file if they differ.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{build_index, Facet, IndexError, IndexKey, RecommendationIndex};
use crate::model::SectionKind;
use crate::serial::{json_value, parse_json};

pub const INDEX_HEADER: &str = "CRTSIDX 1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostingLine {
    section: String,
    facet: String,
    value: String,
    docs: Vec<String>,
}

fn format_err(line: usize, msg: impl std::fmt::Display) -> IndexError {
    IndexError::Format(format!("line {line}: {msg}"))
}

pub fn write_index(index: &RecommendationIndex) -> String {
    let mut out = String::from(INDEX_HEADER);
    out.push('\n');
    for rec in index.docs().values() {
        let line = serde_json::json!({ "doc": json_value(rec) });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    for (key, docs) in index.postings() {
        let line = PostingLine {
            section: key.section.as_str().to_owned(),
            facet: key.facet.as_str().to_owned(),
            value: key.value.clone(),
            docs: docs.iter().cloned().collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("posting lines always serialize"));
        out.push('\n');
    }
    out
}

pub fn read_index(text: &str) -> Result<RecommendationIndex, IndexError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, INDEX_HEADER)) => {}
        Some((_, other)) if other.starts_with("CRTSIDX ") => {
            return Err(IndexError::Format(format!("unsupported version {:?}", &other[8..])))
        }
        _ => return Err(IndexError::Format(format!("missing {INDEX_HEADER:?} header"))),
    }

    let mut docs = Vec::new();
    let mut stored = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| format_err(n, e))?;
        if let Some(doc) = value.get("doc") {
            if !stored.is_empty() {
                return Err(format_err(n, "document after postings"));
            }
            let bytes = serde_json::to_vec(doc).expect("values always serialize");
            docs.push(parse_json(&bytes).map_err(|e| format_err(n, e))?);
        } else {
            let p: PostingLine = serde_json::from_value(value).map_err(|e| format_err(n, e))?;
            let section = SectionKind::ALL
                .into_iter()
                .find(|s| s.as_str() == p.section)
                .ok_or_else(|| format_err(n, format!("unknown section {:?}", p.section)))?;
            let facet = Facet::parse(&p.facet).ok_or_else(|| format_err(n, format!("unknown facet {:?}", p.facet)))?;
            let key = IndexKey { section, facet, value: p.value };
            stored.push((key, p.docs.into_iter().collect::<BTreeSet<_>>()));
        }
    }

    let index = build_index(docs)?;
    let rebuilt: Vec<_> = index.postings().iter().map(|(k, d)| (k.clone(), d.clone())).collect();
    if rebuilt != stored {
        return Err(IndexError::Format("postings do not match the stored documents".to_owned()));
    }
    Ok(index)
}
