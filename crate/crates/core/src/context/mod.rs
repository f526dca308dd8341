//! Placeholder tokens in context: rasterize the stamped PDF, OCR it, and find
//! the tokens again in the recognised text.

mod geometry;
mod ocr;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pdf::{PlaceholderMap, Token};

pub use geometry::{LabelCandidate, PairingParams, Side, WordBox, label_candidates, page_words};
pub use ocr::{
    CommandOcr, CommandRasterizer, DEFAULT_DPI, MIN_DPI, OcrEngine, OcrPage, OcrWord, PageImage, Rasterizer,
    RecordedOcr, RecordedRasterizer, RecordingManifest, ocr_pages, parse_tsv, png_dimensions, write_tsv,
};

#[derive(Debug, Error)]
pub enum ContextError {
    #[error(
        "rasterizer unavailable ({0}); configure a command that writes page-NNNN.png files, e.g. tools/rasterize.py"
    )]
    RendererUnavailable(String),
    #[error(
        "OCR engine unavailable ({0}); configure a command that prints TSV or text for an image, e.g. tools/ocr.py"
    )]
    OcrUnavailable(String),
    #[error("rendering page {page} failed: {reason}")]
    RenderFailure { page: u32, reason: String },
    #[error("OCR of page {page} failed: {reason}")]
    OcrFailure { page: u32, reason: String },
    #[error("{program} exited with {status}: {stderr}")]
    AdapterFailed {
        program: String,
        status: String,
        stderr: String,
    },
    #[error("dpi {0} is below the minimum of 150")]
    DpiTooLow(u32),
    #[error("recorded fixture: {0}")]
    Recording(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const WINDOW_CHARS: usize = 200;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderContext {
    pub full_text: String,
    pub recovered: BTreeSet<Token>,
    pub missing: BTreeSet<Token>,
    /// Text around the first occurrence of each recovered token.
    pub per_token_window: BTreeMap<Token, String>,
}

impl PlaceholderContext {
    /// Recovered and missing counts.
    pub fn coverage(&self) -> (usize, usize) {
        (self.recovered.len(), self.missing.len())
    }
}

static FUZZY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[({\[]{2}\s*(?i:field)[_ ]?(\d+)\s*[)}\]]{2}").expect("valid regex"));

pub fn page_marker(page: u32) -> String {
    format!("===== page {} =====", page + 1)
}

/// Page texts joined with page markers.
pub fn join_pages(pages: &[OcrPage]) -> String {
    pages
        .iter()
        .map(|p| format!("{}\n{}", page_marker(p.page), p.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Finds tokens in OCR text, tolerating brace, case and underscore damage.
/// Digits must match exactly.
pub fn reconcile(ocr_text: &str, map: &PlaceholderMap) -> PlaceholderContext {
    let by_digits: BTreeMap<&str, &Token> = map.tokens().map(|t| (t.digits(), t)).collect();
    let mut full_text = String::with_capacity(ocr_text.len());
    let mut recovered = BTreeSet::new();
    let mut last = 0;
    for caps in FUZZY.captures_iter(ocr_text) {
        let whole = caps.get(0).expect("group 0");
        let Some(token) = by_digits.get(&caps[1]) else {
            continue;
        };
        full_text.push_str(&ocr_text[last..whole.start()]);
        full_text.push_str(&token.braced());
        last = whole.end();
        recovered.insert((*token).clone());
    }
    full_text.push_str(&ocr_text[last..]);

    let missing = map.tokens().filter(|t| !recovered.contains(*t)).cloned().collect();
    let per_token_window = recovered
        .iter()
        .map(|t| (t.clone(), window(&full_text, &t.braced())))
        .collect();
    PlaceholderContext {
        full_text,
        recovered,
        missing,
        per_token_window,
    }
}

fn window(text: &str, needle: &str) -> String {
    let Some(at) = text.find(needle) else {
        return String::new();
    };
    let before: usize = text[..at]
        .char_indices()
        .rev()
        .take(WINDOW_CHARS)
        .last()
        .map_or(at, |(i, _)| i);
    let end = at + needle.len();
    let after = text[end..]
        .char_indices()
        .nth(WINDOW_CHARS)
        .map_or(text.len(), |(i, _)| end + i);
    text[before..after].to_string()
}
