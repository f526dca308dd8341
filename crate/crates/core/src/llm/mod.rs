//! The model-driven stages and the client they share.

mod client;
mod conventions;
mod prompts;
mod stages;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pdf::Token;

pub use client::{
    ChatMessage, ChatRequest, HttpTransport, LlmClient, Mode, RetryPolicy, Transcript, TranscriptRecord, Transport,
    TransportError,
};
pub use conventions::{NamingConventions, Severity, Violation, ViolationKind, has_errors, validate_variable};
pub use prompts::Prompts;
pub use stages::{
    LabelOutcome, Limits, QuarantinedEdit, Stages, chunk_paragraphs, estimate_tokens, quarantine_duplicates,
    synthetic_name,
};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no recorded response for request {key}; the transcript does not match this run")]
    ReplayMiss { key: String },
    #[error("model call failed after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("{stage}: response rejected after one repair attempt: {detail}")]
    SchemaViolation { stage: String, detail: String },
    #[error("{stage}: request needs about {needed} tokens, limit is {limit}; {hint}")]
    BudgetExceeded {
        stage: String,
        needed: usize,
        limit: usize,
        hint: String,
    },
    #[error("{0}")]
    Precondition(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMetadata {
    pub title: String,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingSource {
    /// A stamped token found again by OCR.
    Placeholder,
    /// A stamped token OCR did not return.
    Missing,
    /// A checkbox or other field too small to stamp.
    Checkbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagCode {
    NotRecovered,
    InvalidName,
    DuplicateVariable,
    Unpaired,
    ConventionWarning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flag {
    pub code: FlagCode,
    pub message: String,
}

impl Flag {
    pub fn new(code: FlagCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// A form field and the variable that fills it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableBinding {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<Token>,
    /// PDF field name.
    pub field: String,
    pub source: BindingSource,
    pub variable: String,
    #[serde(default)]
    pub definition: String,
    /// Set when one value is printed in several fields.
    #[serde(default)]
    pub repeated: bool,
    /// Zero-based.
    pub page: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
}

impl VariableBinding {
    pub fn has_flag(&self, code: FlagCode) -> bool {
        self.flags.iter().any(|f| f.code == code)
    }

    /// Quarantined bindings carry a synthetic name and must be fixed by a reviewer.
    pub fn is_quarantined(&self) -> bool {
        self.flags.iter().any(|f| {
            matches!(
                f.code,
                FlagCode::NotRecovered | FlagCode::InvalidName | FlagCode::DuplicateVariable | FlagCode::Unpaired
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Text,
    Area,
    Yesno,
    Number,
    Currency,
    Date,
    Email,
    Phone,
    Zip,
}

impl Datatype {
    pub const ALL: [Datatype; 9] = [
        Datatype::Text,
        Datatype::Area,
        Datatype::Yesno,
        Datatype::Number,
        Datatype::Currency,
        Datatype::Date,
        Datatype::Email,
        Datatype::Phone,
        Datatype::Zip,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Datatype::Text => "text",
            Datatype::Area => "area",
            Datatype::Yesno => "yesno",
            Datatype::Number => "number",
            Datatype::Currency => "currency",
            Datatype::Date => "date",
            Datatype::Email => "email",
            Datatype::Phone => "phone",
            Datatype::Zip => "zip",
        }
    }

    /// Reads a model's datatype, accepting common synonyms. The flag is set
    /// when a synonym was mapped.
    pub fn lenient(s: &str) -> Option<(Datatype, bool)> {
        let lower = s.trim().to_ascii_lowercase();
        if let Ok(d) = lower.parse() {
            return Some((d, false));
        }
        let d = match lower.as_str() {
            "integer" | "int" | "float" | "decimal" | "numeric" => Datatype::Number,
            "string" | "str" | "name" => Datatype::Text,
            "textarea" | "longtext" | "paragraph" => Datatype::Area,
            "boolean" | "bool" | "checkbox" | "yes/no" | "yes_no" => Datatype::Yesno,
            "money" | "dollars" | "amount" => Datatype::Currency,
            "datetime" | "iso_date" => Datatype::Date,
            "telephone" | "tel" | "phone_number" => Datatype::Phone,
            "zipcode" | "zip_code" | "postal_code" | "postcode" => Datatype::Zip,
            _ => return None,
        };
        Some((d, true))
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Datatype {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Datatype::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown datatype '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSpec {
    pub variable: String,
    pub prompt: String,
    pub datatype: Datatype,
    pub screen_id: String,
    pub screen_title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub help: Option<String>,
}

/// Parses a JSON reply, tolerating a surrounding Markdown code fence.
pub fn parse_strict<T: serde::de::DeserializeOwned>(reply: &str) -> Result<T, String> {
    let body = strip_fence(reply);
    let de = &mut serde_json::Deserializer::from_str(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("at {path}: {}", e.inner())
        }
    })
}

fn strip_fence(reply: &str) -> &str {
    let t = reply.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Deserialize, PartialEq)]
    struct T {
        a: Vec<u32>,
    }

    #[test]
    fn fences_are_stripped() {
        assert_eq!(
            parse_strict::<T>("```json\n{\"a\": [1]}\n```").unwrap(),
            T { a: vec![1] }
        );
        assert_eq!(parse_strict::<T>("  {\"a\": []}  ").unwrap(), T { a: vec![] });
    }

    #[test]
    fn errors_cite_the_path() {
        let err = parse_strict::<T>("{\"a\": [1, \"x\"]}").unwrap_err();
        assert!(err.starts_with("at a[1]:"), "{err}");
        assert!(parse_strict::<T>("Sure! Here it is").is_err());
    }

    #[test]
    fn datatype_synonyms() {
        assert_eq!(Datatype::lenient("integer"), Some((Datatype::Number, true)));
        assert_eq!(Datatype::lenient("zip"), Some((Datatype::Zip, false)));
        assert_eq!(Datatype::lenient("Phone"), Some((Datatype::Phone, false)));
        assert_eq!(Datatype::lenient("blob"), None);
    }
}
