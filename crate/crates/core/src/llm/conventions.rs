//! Variable naming conventions and the path validator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LlmError;

const DEFAULT_FILE: &str = include_str!("../../conventions.toml");

const KEYWORDS: &[&str] = &[
    "false", "none", "true", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamingConventions {
    pub reserved_nouns: Vec<String>,
    pub person_attributes: Vec<String>,
}

impl Default for NamingConventions {
    fn default() -> Self {
        Self::parse(DEFAULT_FILE).expect("bundled conventions are valid")
    }
}

impl NamingConventions {
    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let conv: Self = toml::from_str(text).map_err(|e| LlmError::Config(e.to_string()))?;
        for word in conv.reserved_nouns.iter().chain(&conv.person_attributes) {
            if !is_identifier(word) {
                return Err(LlmError::Config(format!("'{word}' is not a lowercase identifier")));
            }
        }
        Ok(conv)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn is_reserved(&self, noun: &str) -> bool {
        self.reserved_nouns.iter().any(|n| n == noun)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z')) && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Empty,
    BadCharacter,
    Uppercase,
    LeadingDigit,
    Keyword,
    EmptySegment,
    BadIndex,
    ReservedNounNeedsIndex,
    UnknownAttribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn error(kind: ViolationKind, message: String) -> Self {
        Self {
            kind,
            severity: Severity::Error,
            message,
        }
    }
}

pub fn has_errors(violations: &[Violation]) -> bool {
    violations.iter().any(|v| v.severity == Severity::Error)
}

struct Segment<'a> {
    name: &'a str,
    index: Option<&'a str>,
    bad_index: bool,
}

/// Every rule a variable path breaks. Warnings do not make a path invalid.
///
/// A path is dot-separated segments, each `[a-z][a-z0-9_]*` with an optional
/// `[N]` list index.
pub fn validate_variable(path: &str, conv: &NamingConventions) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    if path.trim().is_empty() {
        out.push(Violation::error(Empty, "variable name is empty".into()));
        return out;
    }
    if path.chars().any(|c| c.is_uppercase()) {
        out.push(Violation::error(
            Uppercase,
            format!("'{path}' has uppercase letters; use lowercase snake_case"),
        ));
    }
    let bad: String = path
        .chars()
        .filter(|c| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']')))
        .collect();
    if !bad.is_empty() {
        out.push(Violation::error(
            BadCharacter,
            format!("'{path}' contains {bad:?}; only a-z, 0-9, '_', '.' and list indexes are allowed"),
        ));
    }

    let mut segments = Vec::new();
    for raw in path.split('.') {
        if raw.is_empty() {
            out.push(Violation::error(EmptySegment, format!("'{path}' has an empty segment")));
            continue;
        }
        let before = out.len();
        let (name, index) = match raw.find('[') {
            Some(open) => {
                let inner = raw[open + 1..].strip_suffix(']');
                match inner {
                    Some(i) if !i.is_empty() && i.bytes().all(|b| b.is_ascii_digit()) => (&raw[..open], Some(i)),
                    _ => {
                        out.push(Violation::error(
                            BadIndex,
                            format!("'{raw}' has a malformed list index; write name[0]"),
                        ));
                        (&raw[..open], None)
                    }
                }
            }
            None if raw.contains(']') => {
                out.push(Violation::error(BadIndex, format!("'{raw}' has a stray ']'")));
                (raw, None)
            }
            None => (raw, None),
        };
        if name.is_empty() {
            out.push(Violation::error(
                EmptySegment,
                format!("'{raw}' has no name before its index"),
            ));
            continue;
        }
        if name.starts_with(|c: char| c.is_ascii_digit()) {
            out.push(Violation::error(LeadingDigit, format!("'{name}' starts with a digit")));
        }
        if KEYWORDS.contains(&name.to_ascii_lowercase().as_str()) {
            out.push(Violation::error(Keyword, format!("'{name}' is a reserved word")));
        }
        let bad_index = out[before..].iter().any(|v| v.kind == BadIndex);
        segments.push(Segment { name, index, bad_index });
    }

    for (i, seg) in segments.iter().enumerate() {
        if !conv.is_reserved(seg.name) || seg.bad_index {
            continue;
        }
        if seg.index.is_none() {
            out.push(Violation::error(
                ReservedNounNeedsIndex,
                format!("'{}' is a list; refer to one member, as in {}[0]", seg.name, seg.name),
            ));
        } else if let Some(attr) = segments.get(i + 1)
            && !conv.person_attributes.iter().any(|a| a == attr.name)
        {
            out.push(Violation {
                kind: UnknownAttribute,
                severity: Severity::Warning,
                message: format!(
                    "'{}' is not a standard attribute of {}; known: {}",
                    attr.name,
                    seg.name,
                    conv.person_attributes.join(", ")
                ),
            });
        }
    }
    out
}
