//! Change-request datasets: one JSON object per line.
//!
//! ```text
//! {"id": "31110", "title": "...", "description": "...", "goldset": ["org/x/A.java"], "system": "jdt.debug"}
//! ```

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::LazyLock;

use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Index;

/// A Java stack frame such as `at org.foo.Bar.baz(Bar.java:42)`.
static STACK_FRAME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\bat\s+[\w$]+(?:\.[\w$<>]+)+\s*\((?:[\w$]+\.java:\d+|Native Method|Unknown Source)\)",
    )
    .expect("valid regex")
});

pub fn contains_stack_trace(text: &str) -> bool {
    STACK_FRAME.is_match(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRequest {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub goldset: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub requests: Vec<ChangeRequest>,
    /// `(id or line, reason)` for every record that was not kept.
    pub dropped: Vec<(String, String)>,
}

/// Parses and validates requests against the indexed documents. Goldset
/// paths missing from the index are removed; a request left without any
/// relevant document, one whose description holds a stack trace, or one
/// whose title is unusable is dropped with a warning.
pub fn ingest_dataset(
    text: &str,
    index: &Index,
    is_usable_query: impl Fn(&str) -> bool,
) -> Result<Dataset> {
    let mut out = Dataset::default();
    let mut seen = BTreeSet::new();
    let mut reject = |who: String, why: String| {
        warn!("dropping request {who}: {why}");
        out.dropped.push((who, why));
    };
    let mut kept = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut req: ChangeRequest = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                reject(format!("line {}", n + 1), format!("malformed record: {e}"));
                continue;
            }
        };
        if !seen.insert(req.id.clone()) {
            reject(req.id, "duplicate id".into());
            continue;
        }
        if contains_stack_trace(&req.description) {
            reject(req.id, "description contains a stack trace".into());
            continue;
        }
        let missing: Vec<String> = req
            .goldset
            .iter()
            .filter(|g| index.doc_index(g).is_none())
            .cloned()
            .collect();
        for m in &missing {
            req.goldset.remove(m);
        }
        if req.goldset.is_empty() {
            reject(req.id, "no goldset file exists in the corpus".into());
            continue;
        }
        if !missing.is_empty() {
            warn!(
                "request {}: ignoring {} goldset path(s) absent from the corpus",
                req.id,
                missing.len()
            );
        }
        if !is_usable_query(&req.title) {
            reject(req.id, "title is empty after preprocessing".into());
            continue;
        }
        kept.push(req);
    }
    if kept.is_empty() {
        return Err(Error::Dataset("no usable change requests".into()));
    }
    out.requests = kept;
    Ok(out)
}

pub fn load_dataset(
    path: &Path,
    index: &Index,
    is_usable_query: impl Fn(&str) -> bool,
) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ingest_dataset(&text, index, is_usable_query)
}
