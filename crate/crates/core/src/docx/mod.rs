//! Run-level DOCX labeling.
//!
//! A Word body is flattened into `(paragraph, run, text)` triples. Labels come
//! back as full replacement texts for individual runs, so each run keeps its
//! own formatting and nothing is spliced at character offsets.

mod body;
mod package;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

#[derive(Debug, Error)]
pub enum DocxError {
    #[error("not a DOCX package: {0}")]
    NotDocx(String),
    #[error("malformed document XML: {0}")]
    MalformedXml(String),
    #[error("no run ({paragraph}, {run}) in document")]
    UnknownRun { paragraph: usize, run: usize },
    #[error("replacement text for run ({paragraph}, {run}) contains {ch:?}, which XML cannot carry")]
    InvalidText { paragraph: usize, run: usize, ch: char },
    #[error("paragraph {paragraph}: '{{{{' at offset {offset} has no closing '}}}}'")]
    UnbalancedBraces { paragraph: usize, offset: usize },
    #[error("run table JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// One run of a body paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, String)", into = "(usize, usize, String)")]
pub struct RunRef {
    pub paragraph_index: usize,
    pub run_index: usize,
    pub text: String,
}

impl RunRef {
    pub fn new(paragraph_index: usize, run_index: usize, text: impl Into<String>) -> Self {
        Self {
            paragraph_index,
            run_index,
            text: text.into(),
        }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.paragraph_index, self.run_index)
    }
}

impl From<(usize, usize, String)> for RunRef {
    fn from((p, r, text): (usize, usize, String)) -> Self {
        RunRef::new(p, r, text)
    }
}

impl From<RunRef> for (usize, usize, String) {
    fn from(run: RunRef) -> Self {
        (run.paragraph_index, run.run_index, run.text)
    }
}

/// Every run of every body paragraph, in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTable {
    pub runs: Vec<RunRef>,
    /// SHA-256 of the DOCX bytes the table was read from.
    pub source_digest: String,
    /// Body paragraph count, including paragraphs without runs.
    pub paragraphs: usize,
    /// Table cells that were skipped. Non-zero means coverage is partial.
    pub skipped_table_cells: usize,
}

impl RunTable {
    pub fn get(&self, paragraph: usize, run: usize) -> Option<&RunRef> {
        self.runs
            .binary_search_by(|r| r.key().cmp(&(paragraph, run)))
            .ok()
            .map(|i| &self.runs[i])
    }

    /// Plain text of the body: runs concatenated, paragraphs joined by `\n`.
    pub fn plain_text(&self) -> String {
        let mut out = String::new();
        for p in 0..self.paragraphs {
            if p > 0 {
                out.push('\n');
            }
            for run in self.paragraph_runs(p) {
                out.push_str(&run.text);
            }
        }
        out
    }

    pub fn paragraph_runs(&self, paragraph: usize) -> &[RunRef] {
        let start = self.runs.partition_point(|r| r.paragraph_index < paragraph);
        let end = self.runs.partition_point(|r| r.paragraph_index <= paragraph);
        &self.runs[start..end]
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

/// Full replacement text for one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, String)", into = "(usize, usize, String)")]
pub struct RunEdit {
    pub paragraph_index: usize,
    pub run_index: usize,
    pub new_text: String,
}

impl RunEdit {
    pub fn new(paragraph_index: usize, run_index: usize, new_text: impl Into<String>) -> Self {
        Self {
            paragraph_index,
            run_index,
            new_text: new_text.into(),
        }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.paragraph_index, self.run_index)
    }
}

impl From<(usize, usize, String)> for RunEdit {
    fn from((p, r, text): (usize, usize, String)) -> Self {
        RunEdit::new(p, r, text)
    }
}

impl From<RunEdit> for (usize, usize, String) {
    fn from(edit: RunEdit) -> Self {
        (edit.paragraph_index, edit.run_index, edit.new_text)
    }
}

#[derive(Debug, Clone)]
pub struct EditedDocx {
    pub bytes: Vec<u8>,
    pub warnings: Vec<String>,
}

pub fn extract_runs(docx: &[u8]) -> Result<RunTable, DocxError> {
    let pkg = package::Package::open(docx)?;
    let xml = pkg.main_xml()?;
    let scan = body::scan(&xml)?;
    if scan.table_cells > 0 {
        log::warn!("skipped {} table cell(s); tables are not labeled", scan.table_cells);
    }
    Ok(RunTable {
        runs: scan.runs,
        source_digest: sha256_hex(docx),
        paragraphs: scan.paragraphs,
        skipped_table_cells: scan.table_cells,
    })
}

/// Serializes runs as a JSON array of `[paragraph, run, text]` triples.
pub fn serialize_runs(runs: &[RunRef]) -> String {
    let mut out = String::from("[");
    for (i, run) in runs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let text = serde_json::to_string(&run.text).expect("string serialization");
        out.push_str(&format!("[{}, {}, {}]", run.paragraph_index, run.run_index, text));
    }
    out.push(']');
    out
}

pub fn parse_runs(json: &str) -> Result<Vec<RunRef>, DocxError> {
    Ok(serde_json::from_str(json)?)
}

fn is_xml_char(c: char) -> bool {
    matches!(c, '\u{9}' | '\u{A}' | '\u{D}' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..)
}

/// Replaces the full text of each targeted run. Run and paragraph
/// properties, and every other part of the package, are left as they were.
///
/// A run edited twice in one batch keeps the last text.
pub fn apply_run_edits(docx: &[u8], edits: &[RunEdit]) -> Result<EditedDocx, DocxError> {
    let pkg = package::Package::open(docx)?;
    let xml = pkg.main_xml()?;

    let mut warnings = Vec::new();
    let mut by_key: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for edit in edits {
        if let Some(ch) = edit.new_text.chars().find(|c| !is_xml_char(*c)) {
            return Err(DocxError::InvalidText {
                paragraph: edit.paragraph_index,
                run: edit.run_index,
                ch,
            });
        }
        if by_key.insert(edit.key(), edit.new_text.clone()).is_some() {
            warnings.push(format!(
                "run ({}, {}) edited more than once; keeping the last text",
                edit.paragraph_index, edit.run_index
            ));
        }
    }

    let (new_xml, hit) = body::rewrite(&xml, &by_key)?;
    if let Some(&(paragraph, run)) = by_key.keys().find(|k| !hit.contains(k)) {
        return Err(DocxError::UnknownRun { paragraph, run });
    }
    let bytes = pkg.replace_main(new_xml.as_bytes())?;
    Ok(EditedDocx { bytes, warnings })
}

/// Distinct `{{ ... }}` expressions, trimmed, in first-appearance order.
pub fn extract_template_variables(docx: &[u8]) -> Result<Vec<String>, DocxError> {
    let table = extract_runs(docx)?;
    let mut seen = Vec::<String>::new();
    for p in 0..table.paragraphs {
        let text: String = table.paragraph_runs(p).iter().map(|r| r.text.as_str()).collect();
        for span in placeholder_spans(&text, p)? {
            let inner = text[span.inner.clone()].trim().to_string();
            if !seen.contains(&inner) {
                seen.push(inner);
            }
        }
    }
    Ok(seen)
}

/// Byte ranges of one `{{ ... }}` placeholder within a paragraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceholderSpan {
    pub outer: std::ops::Range<usize>,
    pub inner: std::ops::Range<usize>,
}

pub fn placeholder_spans(text: &str, paragraph: usize) -> Result<Vec<PlaceholderSpan>, DocxError> {
    let mut spans = Vec::new();
    let mut pos = 0;
    while let Some(open) = text[pos..].find("{{").map(|i| i + pos) {
        let Some(close) = text[open + 2..].find("}}").map(|i| i + open + 2) else {
            return Err(DocxError::UnbalancedBraces {
                paragraph,
                offset: open,
            });
        };
        spans.push(PlaceholderSpan {
            outer: open..close + 2,
            inner: open + 2..close,
        });
        pos = close + 2;
    }
    Ok(spans)
}

/// Substitutes `{{ expr }}` placeholders with values from `lookup`.
///
/// A placeholder that spans several runs is written into the first of them
/// (taking that run's formatting) and removed from the rest; each such merge
/// is reported as a warning.
pub fn render_placeholders(docx: &[u8], lookup: &dyn Fn(&str) -> Option<String>) -> Result<EditedDocx, DocxError> {
    let table = extract_runs(docx)?;
    let mut edits = Vec::new();
    let mut warnings = Vec::new();

    for p in 0..table.paragraphs {
        let runs = table.paragraph_runs(p);
        let text: String = runs.iter().map(|r| r.text.as_str()).collect();
        let spans = placeholder_spans(&text, p)?;
        if spans.is_empty() {
            continue;
        }
        // Byte offset where each run starts in the paragraph text.
        let mut starts = Vec::with_capacity(runs.len());
        let mut off = 0;
        for r in runs {
            starts.push(off);
            off += r.text.len();
        }
        let run_at = |byte: usize| starts.partition_point(|&s| s <= byte).saturating_sub(1);

        let mut new_texts: Vec<String> = runs.iter().map(|r| r.text.clone()).collect();
        // Apply from the back so earlier offsets stay valid.
        for span in spans.iter().rev() {
            let expr = text[span.inner.clone()].trim();
            let Some(value) = lookup(expr) else {
                continue;
            };
            let first = run_at(span.outer.start);
            let last = run_at(span.outer.end - 1);
            if first != last {
                warnings.push(format!(
                    "paragraph {p}: placeholder '{{{{ {expr} }}}}' spans runs {first}..={last}; merged into run {first}"
                ));
            }
            for (i, slot) in new_texts.iter_mut().enumerate().take(last + 1).skip(first) {
                let run_start = starts[i];
                let run_end = run_start + runs[i].text.len();
                let cut_start = span.outer.start.max(run_start) - run_start;
                let cut_end = span.outer.end.min(run_end) - run_start;
                let replacement = if i == first { value.as_str() } else { "" };
                slot.replace_range(cut_start..cut_end, replacement);
            }
        }
        for (run, new_text) in runs.iter().zip(new_texts) {
            if run.text != new_text {
                edits.push(RunEdit::new(run.paragraph_index, run.run_index, new_text));
            }
        }
    }

    let mut out = apply_run_edits(docx, &edits)?;
    warnings.append(&mut out.warnings);
    out.warnings = warnings;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::docx::DocxBuilder;

    fn letter() -> Vec<u8> {
        DocxBuilder::new()
            .paragraph(&[("Dear ", ""), ("John Smith:", "<w:b/>")])
            .build()
    }

    #[test]
    fn extracts_runs_in_order() {
        let table = extract_runs(&letter()).unwrap();
        assert_eq!(
            table.runs,
            vec![RunRef::new(0, 0, "Dear "), RunRef::new(0, 1, "John Smith:")]
        );
        assert_eq!(table.paragraphs, 1);
    }

    #[test]
    fn empty_body_gives_empty_table() {
        let docx = DocxBuilder::new().build();
        let table = extract_runs(&docx).unwrap();
        assert!(table.is_empty());
        assert_eq!(serialize_runs(&table.runs), "[]");
    }

    #[test]
    fn serializes_like_the_listing() {
        let runs = vec![RunRef::new(0, 1, "Dear John Smith:")];
        assert_eq!(serialize_runs(&runs), r#"[[0, 1, "Dear John Smith:"]]"#);
        assert_eq!(parse_runs(&serialize_runs(&runs)).unwrap(), runs);
    }

    #[test]
    fn quotes_survive_serialization() {
        let runs = vec![RunRef::new(3, 2, "say \"hi\" \\ \n")];
        assert_eq!(parse_runs(&serialize_runs(&runs)).unwrap(), runs);
    }

    #[test]
    fn rejects_non_zip() {
        assert!(matches!(extract_runs(b"plain text"), Err(DocxError::NotDocx(_))));
    }

    #[test]
    fn edit_replaces_full_run_text() {
        let out = apply_run_edits(&letter(), &[RunEdit::new(0, 1, "{{ users[0].name.full }}:")]).unwrap();
        let table = extract_runs(&out.bytes).unwrap();
        assert_eq!(table.plain_text(), "Dear {{ users[0].name.full }}:");
    }

    #[test]
    fn unknown_run_is_an_error() {
        let err = apply_run_edits(&letter(), &[RunEdit::new(0, 5, "x")]).unwrap_err();
        assert!(matches!(err, DocxError::UnknownRun { paragraph: 0, run: 5 }));
    }

    #[test]
    fn duplicate_edit_keeps_last() {
        let out = apply_run_edits(
            &letter(),
            &[RunEdit::new(0, 0, "first "), RunEdit::new(0, 0, "second ")],
        )
        .unwrap();
        assert_eq!(out.warnings.len(), 1);
        let table = extract_runs(&out.bytes).unwrap();
        assert_eq!(table.runs[0].text, "second ");
    }

    #[test]
    fn control_characters_are_refused() {
        let err = apply_run_edits(&letter(), &[RunEdit::new(0, 0, "bad\u{1}")]).unwrap_err();
        assert!(matches!(err, DocxError::InvalidText { .. }));
    }

    #[test]
    fn tabs_breaks_and_carriage_returns_round_trip() {
        let text = " lead\ttab\nline\r\nend ";
        let out = apply_run_edits(&letter(), &[RunEdit::new(0, 0, text)]).unwrap();
        assert_eq!(extract_runs(&out.bytes).unwrap().runs[0].text, text);
    }

    #[test]
    fn template_variables_dedup_in_order() {
        let docx = DocxBuilder::new()
            .paragraph(&[("Dear {{ users[0].name.full }}:", "")])
            .paragraph(&[("{{ court_name }} and {{users[0].name.full}}", "")])
            .build();
        assert_eq!(
            extract_template_variables(&docx).unwrap(),
            vec!["users[0].name.full", "court_name"]
        );
        assert!(extract_template_variables(&letter()).unwrap().is_empty());
    }

    #[test]
    fn unbalanced_braces_name_the_paragraph() {
        let docx = DocxBuilder::new()
            .paragraph(&[("fine", "")])
            .paragraph(&[("Dear {{ users[0].name.full :", "")])
            .build();
        assert!(matches!(
            extract_template_variables(&docx),
            Err(DocxError::UnbalancedBraces {
                paragraph: 1,
                offset: 5
            })
        ));
    }

    #[test]
    fn render_merges_split_placeholders() {
        let docx = DocxBuilder::new()
            .paragraph(&[("Name: {{ users[0].na", "<w:b/>"), ("me.full }}.", "")])
            .paragraph(&[("Zip {{ zip }}", "")])
            .build();
        let out = render_placeholders(&docx, &|expr| match expr {
            "users[0].name.full" => Some("Ashley Arnold".into()),
            "zip" => Some("02108".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(out.warnings.len(), 1);
        let table = extract_runs(&out.bytes).unwrap();
        assert_eq!(table.plain_text(), "Name: Ashley Arnold.\nZip 02108");
        assert_eq!(table.runs[0].text, "Name: Ashley Arnold");
    }
}
