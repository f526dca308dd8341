//! A deterministic stand-in for the model, used to record fixture transcripts
//! and to drive tests offline.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, LazyLock, Mutex};

use regex::Regex;

use serde_json::{Value, json};

use crate::llm::{ChatRequest, Transport, TransportError};

/// Labels it knows how to name, and the question it asks for each.
const KNOWN: &[(&str, &str, &str, &str, &str)] = &[
    // label, variable, prompt, datatype, screen
    (
        "first name",
        "users[0].name.first",
        "What is your first name?",
        "text",
        "your_name",
    ),
    (
        "last name",
        "users[0].name.last",
        "What is your last name?",
        "text",
        "your_name",
    ),
    (
        "street address",
        "users[0].address.street",
        "What is your street address?",
        "text",
        "your_address",
    ),
    (
        "city or town",
        "users[0].address.city",
        "What city or town do you live in?",
        "text",
        "your_address",
    ),
    (
        "state",
        "users[0].address.state",
        "What state do you live in?",
        "text",
        "your_address",
    ),
    // Deliberately a poor datatype: a number would lose the leading zero.
    (
        "zip code",
        "users[0].address.zip",
        "What is your zip code?",
        "number",
        "your_address",
    ),
    (
        "phone number",
        "users[0].phone_number",
        "What is your phone number?",
        "number",
        "contact",
    ),
    (
        "employer name",
        "employer_name",
        "Who is your employer?",
        "text",
        "income",
    ),
    (
        "monthly income",
        "monthly_income",
        "How much do you earn each month?",
        "currency",
        "income",
    ),
    (
        "date signed",
        "signature_date",
        "What date are you signing this form?",
        "date",
        "signature",
    ),
];

/// Literal text the DOCX labeller replaces, longest first.
const DOCX_LEXICON: &[(&str, &str)] = &[
    ("123 Main Street", "users[0].address.street"),
    ("2024-CV-0001", "docket_number"),
    ("Jane Doe", "users[0].name.full"),
    ("John Doe", "other_parties[0].name.full"),
    ("John Smith", "other_parties[0].name.full"),
    ("555-5555", "users[0].phone_number"),
    ("Boston", "users[0].address.city"),
    ("02108", "users[0].address.zip"),
];

/// Upper-case slots such as `[DATE]` or `{ADDRESS}`.
static SLOT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[([A-Z][A-Z ]*[A-Z])\]|\{([A-Z][A-Z ]*[A-Z])\}").expect("valid regex"));

const SLOT_NAMES: &[(&str, &str)] = &[
    ("NAME", "users[0].name.full"),
    ("PLAINTIFF", "users[0].name.full"),
    ("DEFENDANT", "other_parties[0].name.full"),
    ("ADDRESS", "users[0].address.street"),
];

#[derive(Default)]
struct Inner {
    queued: Mutex<VecDeque<String>>,
    calls: AtomicUsize,
    tasks: Mutex<Vec<String>>,
}

/// Answers each task from fixed tables. Queued replies take precedence, so
/// tests can inject malformed output.
#[derive(Clone, Default)]
pub struct ScriptedModel {
    inner: Arc<Inner>,
}

impl ScriptedModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// The next call returns `reply` verbatim.
    pub fn queue(&self, reply: impl Into<String>) {
        self.inner.queued.lock().expect("lock").push_back(reply.into());
    }

    pub fn calls(&self) -> usize {
        self.inner.calls.load(Ordering::SeqCst)
    }

    /// Task ids in call order.
    pub fn tasks(&self) -> Vec<String> {
        self.inner.tasks.lock().expect("lock").clone()
    }

    pub fn boxed(&self) -> Box<dyn Transport> {
        Box::new(self.clone())
    }
}

impl Transport for ScriptedModel {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.inner.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == "user" && m.content.starts_with("Task id:"))
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let task = prompt
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("Task id:"))
            .map(str::trim)
            .unwrap_or("")
            .to_string();
        self.inner.tasks.lock().expect("lock").push(task.clone());
        if let Some(reply) = self.inner.queued.lock().expect("lock").pop_front() {
            return Ok(reply);
        }
        let input = prompt.split_once("INPUT:\n").map_or("", |(_, i)| i);
        let reply = match task.as_str() {
            "label_docx" => label_docx(input),
            "doc_metadata" => doc_metadata(input),
            "rename_placeholders" => rename(input),
            "write_definitions" => definitions(input),
            "draft_questions" => questions(input),
            "pair_checkboxes" => checkboxes(input),
            other => {
                return Err(TransportError {
                    message: format!("scripted model has no answer for task '{other}'"),
                    retryable: false,
                });
            }
        };
        Ok(reply.to_string())
    }
}

fn parse(input: &str) -> Vec<Value> {
    serde_json::from_str(input).unwrap_or_default()
}

fn snake(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_matches('_');
    if out.starts_with(|c: char| c.is_ascii_digit()) || out.is_empty() {
        format!("value_{out}")
    } else {
        out.to_string()
    }
}

fn known(label: &str) -> Option<&'static (&'static str, &'static str, &'static str, &'static str, &'static str)> {
    let l = label.trim().trim_end_matches(':').to_lowercase();
    KNOWN.iter().find(|k| k.0 == l)
}

/// The text on a token's line before the token.
fn label_before(context: &str, token: &str) -> String {
    let braced = format!("{{{{{token}}}}}");
    let Some(at) = context.find(&braced) else {
        return String::new();
    };
    let line_start = context[..at].rfind('\n').map_or(0, |i| i + 1);
    context[line_start..at].trim().to_string()
}

fn label_docx(input: &str) -> Value {
    let mut edits = Vec::new();
    for run in parse(input) {
        let (Some(p), Some(r), Some(text)) = (run[0].as_u64(), run[1].as_u64(), run[2].as_str()) else {
            continue;
        };
        let mut new = text.to_string();
        for (literal, variable) in DOCX_LEXICON {
            new = new.replace(literal, &format!("{{{{ {variable} }}}}"));
        }
        let new = SLOT
            .replace_all(&new, |c: &regex::Captures| {
                let word = c.get(1).or(c.get(2)).map_or("", |m| m.as_str());
                let variable = SLOT_NAMES
                    .iter()
                    .find(|(w, _)| *w == word)
                    .map_or_else(|| snake(word), |(_, v)| v.to_string());
                format!("{{{{ {variable} }}}}")
            })
            .into_owned();
        if new != text {
            edits.push(json!([p, r, new]));
        }
    }
    json!({ "edits": edits })
}

fn doc_metadata(input: &str) -> Value {
    let pages = input.lines().filter(|l| l.starts_with("===== page ")).count().max(1);
    let title = input
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("=====") && !l.contains("{{"))
        .unwrap_or("Court form");
    json!({
        "title": title,
        "description": format!("Collects the answers needed to complete the {pages}-page form \"{title}\"."),
    })
}

fn rename(input: &str) -> Value {
    let bindings: Vec<Value> = parse(input)
        .iter()
        .map(|entry| {
            let token = entry["token"].as_str().unwrap_or("");
            let label = label_before(entry["context"].as_str().unwrap_or(""), token);
            let variable = match known(&label) {
                Some(k) => k.1.to_string(),
                None if label.is_empty() => format!("value_{}", token.trim_start_matches("field_")),
                None => snake(&label),
            };
            json!({ "token": token, "variable": variable, "repeated": false })
        })
        .collect();
    json!({ "bindings": bindings })
}

fn definitions(input: &str) -> Value {
    let defs: Vec<Value> = parse(input)
        .iter()
        .map(|entry| {
            let variable = entry["variable"].as_str().unwrap_or("");
            let context = entry["context"].as_str().unwrap_or("");
            let token = entry["token"].as_str().unwrap_or("");
            let label = Some(label_before(context, token))
                .map(|l| l.trim_end_matches(':').to_string())
                .filter(|l| !l.is_empty());
            let definition = match label {
                Some(l) => format!("The entry for \"{l}\" on the form."),
                None => format!("The value of {variable}."),
            };
            json!({ "variable": variable, "definition": definition })
        })
        .collect();
    json!({ "definitions": defs })
}

fn questions(input: &str) -> Value {
    let qs: Vec<Value> = parse(input)
        .iter()
        .map(|entry| {
            let variable = entry["variable"].as_str().unwrap_or("");
            if let Some(k) = KNOWN.iter().find(|k| k.1 == variable) {
                return json!({
                    "variable": variable,
                    "prompt": k.2,
                    "datatype": k.3,
                    "screen_id": k.4,
                    "screen_title": title_case(k.4),
                    "help": null,
                });
            }
            if entry["kind"] == "checkbox" {
                let prompt = match entry["label"].as_str() {
                    Some(label) => format!("{label}?"),
                    None => format!("{} Should it be checked?", entry["definition"].as_str().unwrap_or("")),
                };
                return json!({
                    "variable": variable,
                    "prompt": prompt.trim(),
                    "datatype": "boolean",
                    "screen_id": "options",
                    "screen_title": "Options",
                    "help": null,
                });
            }
            json!({
                "variable": variable,
                "prompt": format!("{}", entry["definition"].as_str().unwrap_or(variable)),
                "datatype": "text",
                "screen_id": "other_details",
                "screen_title": "Other details",
                "help": "A reviewer should reword this question.",
            })
        })
        .collect();
    json!({ "questions": qs })
}

fn checkboxes(input: &str) -> Value {
    let boxes: Vec<Value> = parse(input)
        .iter()
        .map(|entry| {
            let field = entry["field"].as_str().unwrap_or("");
            let label = entry["label"].as_str().unwrap_or("").trim();
            let words: Vec<&str> = label
                .split_whitespace()
                .filter(|w| w.chars().any(char::is_alphanumeric))
                .collect();
            if words.is_empty() {
                return json!({ "field": field, "variable": null, "definition": null });
            }
            json!({
                "field": field,
                "variable": snake(&words.join(" ")),
                "definition": format!("Checked if: {label}."),
            })
        })
        .collect();
    json!({ "checkboxes": boxes })
}

fn title_case(id: &str) -> String {
    let mut out = String::new();
    for (i, w) in id.split('_').enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let mut c = w.chars();
        if let Some(f) = c.next() {
            if i == 0 {
                out.extend(f.to_uppercase());
            } else {
                out.push(f);
            }
            out.push_str(c.as_str());
        }
    }
    out
}
