//! Line-delimited annotation records.

use std::collections::HashSet;
use std::fmt::Write;
use std::path::Path;

use crate::annotate::AnnotationRecord;
use crate::dataio::{from_json_with_path, write_atomic};
use crate::error::{Error, Result};

/// Parse every non-blank line. All problems (schema errors and duplicate
/// `(annotator, sample, condition)` keys) are collected and reported in a
/// single error.
pub fn parse_annotations(text: &str, path: &str) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match from_json_with_path::<AnnotationRecord>(line, path, i) {
            Ok(r) => {
                if seen.insert((r.annotator_id.clone(), r.sample_id.clone(), r.condition)) {
                    out.push(r);
                } else {
                    problems.push(format!(
                        "record {i}: duplicate annotation by {} for {} under {}",
                        r.annotator_id, r.sample_id, r.condition
                    ));
                }
            }
            Err(Error::Schema { record, field, message, .. }) => {
                problems.push(format!("record {record}: field `{field}`: {message}"))
            }
            Err(e) => problems.push(format!("record {i}: {e}")),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Error::Records { path: path.into(), count: problems.len(), details: problems.join("\n") })
    }
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, &path.display().to_string())
}

pub fn write_annotations(records: &[AnnotationRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?).unwrap();
    }
    write_atomic(path, out.as_bytes())
}
