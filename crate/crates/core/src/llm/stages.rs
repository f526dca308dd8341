//! The model-driven stages. Each one sends a strict JSON request, checks the
//! reply, and turns anything unusable into quarantined data for review.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    BindingSource, ChatMessage, Datatype, DocMetadata, Flag, FlagCode, LlmClient, LlmError, NamingConventions, Prompts,
    QuestionSpec, Severity, VariableBinding, has_errors, parse_strict, validate_variable,
};
use crate::context::{LabelCandidate, PairingParams, PlaceholderContext, WordBox, label_candidates};
use crate::docx::{RunEdit, RunRef, RunTable, placeholder_spans, serialize_runs};
use crate::pdf::{FieldDescriptor, PlaceholderMap};

const TITLE_MAX: usize = 120;
const DESCRIPTION_MAX: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Largest estimated size of one request.
    pub request_tokens: usize,
    /// Largest estimated size of one DOCX chunk's run table.
    pub docx_chunk_tokens: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            request_tokens: 8000,
            docx_chunk_tokens: 3000,
        }
    }
}

/// Rough token count: four characters per token.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

pub struct Stages<'a> {
    pub client: &'a LlmClient,
    pub prompts: &'a Prompts,
    pub conv: &'a NamingConventions,
    pub limits: Limits,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedEdit {
    pub edit: RunEdit,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelOutcome {
    pub edits: Vec<RunEdit>,
    pub quarantined: Vec<QuarantinedEdit>,
    pub chunks: usize,
    pub warnings: Vec<String>,
}

/// Paragraph groups whose run tables fit `limit`, each overlapping the
/// previous group by one paragraph. Paragraphs without runs are skipped.
pub fn chunk_paragraphs(table: &RunTable, limit: usize) -> Result<Vec<Vec<usize>>, LlmError> {
    let cost = |p: usize| estimate_tokens(&serialize_runs(table.paragraph_runs(p)));
    let mut chunks = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut current_cost = 0;
    for p in (0..table.paragraphs).filter(|&p| !table.paragraph_runs(p).is_empty()) {
        let c = cost(p);
        if c > limit {
            return Err(LlmError::BudgetExceeded {
                stage: "label_docx".into(),
                needed: c,
                limit,
                hint: format!("paragraph {p} alone exceeds the chunk size; raise docx_chunk_tokens"),
            });
        }
        if !current.is_empty() && current_cost + c > limit {
            let overlap = *current.last().expect("non-empty");
            chunks.push(std::mem::take(&mut current));
            current_cost = 0;
            if cost(overlap) + c <= limit {
                current.push(overlap);
                current_cost = cost(overlap);
            }
        }
        current.push(p);
        current_cost += c;
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    Ok(chunks)
}

/// `unknown_field_07` for a token, `unknown_<field>` otherwise.
pub fn synthetic_name(binding: &VariableBinding) -> String {
    match &binding.token {
        Some(t) => format!("unknown_{}", t.name()),
        None => format!("unknown_{}", sanitize(&binding.field)),
    }
}

fn sanitize(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_matches('_').to_string();
    if out.is_empty() { "field".into() } else { out }
}

/// Quarantines bindings that share a variable unless every one of them is
/// marked repeated.
pub fn quarantine_duplicates(bindings: &mut [VariableBinding]) {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, b) in bindings.iter().enumerate() {
        if !b.is_quarantined() {
            groups.entry(b.variable.clone()).or_default().push(i);
        }
    }
    for (variable, idx) in groups {
        if idx.len() < 2 || idx.iter().all(|&i| bindings[i].repeated) {
            continue;
        }
        let fields: Vec<String> = idx.iter().map(|&i| bindings[i].field.clone()).collect();
        for &i in &idx {
            let b = &mut bindings[i];
            b.flags.push(Flag::new(
                FlagCode::DuplicateVariable,
                format!(
                    "'{variable}' is used by fields {} without being marked repeated",
                    fields.join(", ")
                ),
            ));
            b.variable = synthetic_name(b);
        }
    }
}

fn page_of(fields: &[FieldDescriptor], name: &str) -> u32 {
    fields.iter().find(|f| f.name == name).map_or(0, |f| f.page)
}

fn unidentified(kind: &str, page: u32) -> String {
    format!("Unidentified {kind} on page {}.", page + 1)
}

fn truncate(text: &str, max: usize) -> Option<String> {
    if text.chars().count() <= max {
        return None;
    }
    let mut cut: String = text.chars().take(max - 1).collect();
    cut = cut.trim_end().to_string();
    cut.push('…');
    Some(cut)
}

fn set_problems<'a>(
    what: &str,
    expected: impl IntoIterator<Item = &'a str>,
    got: impl IntoIterator<Item = &'a str>,
) -> Result<(), String> {
    let expected: BTreeSet<&str> = expected.into_iter().collect();
    let mut seen = BTreeSet::new();
    let mut problems = Vec::new();
    for g in got {
        if !expected.contains(g) {
            problems.push(format!("unknown {what} '{g}'"));
        } else if !seen.insert(g) {
            problems.push(format!("{what} '{g}' appears twice"));
        }
    }
    for e in expected.difference(&seen) {
        problems.push(format!("{what} '{e}' is missing"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditsReply {
    edits: Vec<(usize, usize, String)>,
}

#[derive(Deserialize)]
struct MetadataReply {
    title: String,
    description: String,
}

#[derive(Deserialize)]
struct RenameEntry {
    token: String,
    variable: String,
    #[serde(default)]
    repeated: bool,
}

#[derive(Deserialize)]
struct RenameReply {
    bindings: Vec<RenameEntry>,
}

#[derive(Deserialize)]
struct DefinitionEntry {
    variable: String,
    definition: String,
}

#[derive(Deserialize)]
struct DefinitionsReply {
    definitions: Vec<DefinitionEntry>,
}

#[derive(Deserialize)]
struct QuestionEntry {
    variable: String,
    prompt: String,
    datatype: String,
    screen_id: String,
    screen_title: String,
    #[serde(default)]
    help: Option<String>,
}

#[derive(Deserialize)]
struct QuestionsReply {
    questions: Vec<QuestionEntry>,
}

#[derive(Deserialize)]
struct CheckboxEntry {
    field: String,
    variable: Option<String>,
    #[serde(default)]
    definition: Option<String>,
}

#[derive(Deserialize)]
struct CheckboxReply {
    checkboxes: Vec<CheckboxEntry>,
}

impl Stages<'_> {
    fn ask<T: DeserializeOwned>(
        &self,
        stage: &str,
        input: &str,
        check: impl Fn(&T) -> Result<(), String>,
    ) -> Result<T, LlmError> {
        let system = self.prompts.render(
            "system",
            &[
                ("reserved_nouns", &self.conv.reserved_nouns.join(", ")),
                ("person_attributes", &self.conv.person_attributes.join(", ")),
            ],
        )?;
        let user = self.prompts.render(stage, &[("input", input)])?;
        let mut messages = vec![ChatMessage::system(system), ChatMessage::user(user)];
        let needed: usize = messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        if needed > self.limits.request_tokens {
            return Err(LlmError::BudgetExceeded {
                stage: stage.into(),
                needed,
                limit: self.limits.request_tokens,
                hint: "the input is too large for one request; raise request_tokens".into(),
            });
        }

        let parse = |reply: &str| parse_strict::<T>(reply).and_then(|v| check(&v).map(|()| v));
        let reply = self.client.complete(&self.client.request(messages.clone()))?;
        let error = match parse(&reply) {
            Ok(v) => return Ok(v),
            Err(e) => e,
        };
        log::warn!("{stage}: unusable reply ({error}); asking once more");
        messages.push(ChatMessage::assistant(reply));
        messages.push(ChatMessage::user(self.prompts.render("repair", &[("error", &error)])?));
        let reply = self.client.complete(&self.client.request(messages))?;
        parse(&reply).map_err(|detail| LlmError::SchemaViolation {
            stage: stage.into(),
            detail,
        })
    }

    /// Replacement texts for runs that hold case-specific text.
    pub fn label_docx_runs(&self, table: &RunTable) -> Result<LabelOutcome, LlmError> {
        let chunks = chunk_paragraphs(table, self.limits.docx_chunk_tokens)?;
        let mut out = LabelOutcome {
            chunks: chunks.len(),
            ..Default::default()
        };
        let mut seen = BTreeSet::new();
        for chunk in &chunks {
            let runs: Vec<RunRef> = chunk
                .iter()
                .flat_map(|&p| table.paragraph_runs(p).iter().cloned())
                .collect();
            let keys: BTreeSet<(usize, usize)> = runs.iter().map(RunRef::key).collect();
            let reply: EditsReply = self.ask("label_docx", &serialize_runs(&runs), |r: &EditsReply| {
                let bad: Vec<String> = r
                    .edits
                    .iter()
                    .filter(|(p, run, _)| !keys.contains(&(*p, *run)))
                    .map(|(p, run, t)| format!("[{p}, {run}, {t:?}]"))
                    .collect();
                if bad.is_empty() {
                    Ok(())
                } else {
                    Err(format!("edits name runs that are not in the input: {}", bad.join(", ")))
                }
            })?;
            for (p, r, text) in reply.edits {
                if !seen.insert((p, r)) {
                    continue;
                }
                let old = &table.get(p, r).expect("checked against the chunk").text;
                if *old == text {
                    continue;
                }
                let edit = RunEdit::new(p, r, text);
                let reasons = self.edit_problems(&edit, &mut out.warnings);
                if reasons.is_empty() {
                    out.edits.push(edit);
                } else {
                    out.quarantined.push(QuarantinedEdit { edit, reasons });
                }
            }
        }
        out.edits.sort_by_key(RunEdit::key);
        Ok(out)
    }

    fn edit_problems(&self, edit: &RunEdit, warnings: &mut Vec<String>) -> Vec<String> {
        let spans = match placeholder_spans(&edit.new_text, edit.paragraph_index) {
            Ok(s) => s,
            Err(e) => return vec![e.to_string()],
        };
        if spans.is_empty() {
            return vec!["the new text adds no placeholder".into()];
        }
        let mut reasons = Vec::new();
        for span in spans {
            let expr = edit.new_text[span.inner].split('|').next().unwrap_or("").trim();
            for v in validate_variable(expr, self.conv) {
                let line = format!("run ({}, {}): {}", edit.paragraph_index, edit.run_index, v.message);
                match v.severity {
                    Severity::Error => reasons.push(line),
                    Severity::Warning => warnings.push(line),
                }
            }
        }
        reasons
    }

    /// Title and description for the form.
    pub fn generate_doc_metadata(&self, ctx: &PlaceholderContext) -> Result<(DocMetadata, Vec<String>), LlmError> {
        let has_text = ctx
            .full_text
            .lines()
            .any(|l| !l.trim().is_empty() && !l.starts_with("===== page "));
        if !has_text {
            return Err(LlmError::Precondition(
                "the OCR text is empty; nothing to describe".into(),
            ));
        }
        let reply: MetadataReply = self.ask("doc_metadata", &ctx.full_text, |r: &MetadataReply| {
            if r.title.trim().is_empty() || r.description.trim().is_empty() {
                Err("title and description must both be non-empty".into())
            } else {
                Ok(())
            }
        })?;
        let mut warnings = Vec::new();
        let mut meta = DocMetadata {
            title: reply.title.trim().to_string(),
            description: reply.description.trim().to_string(),
        };
        if let Some(t) = truncate(&meta.title, TITLE_MAX) {
            warnings.push(format!(
                "title was longer than {TITLE_MAX} characters and was shortened"
            ));
            meta.title = t;
        }
        if let Some(d) = truncate(&meta.description, DESCRIPTION_MAX) {
            warnings.push(format!(
                "description was longer than {DESCRIPTION_MAX} characters and was shortened"
            ));
            meta.description = d;
        }
        Ok((meta, warnings))
    }

    /// One binding per stamped token. Tokens OCR missed, names that break the
    /// conventions and unmarked duplicates get synthetic names and flags.
    pub fn rename_placeholders(
        &self,
        ctx: &PlaceholderContext,
        map: &PlaceholderMap,
        fields: &[FieldDescriptor],
    ) -> Result<Vec<VariableBinding>, LlmError> {
        let recovered: Vec<&str> = map
            .tokens()
            .filter(|t| ctx.recovered.contains(*t))
            .map(|t| t.name())
            .collect();
        let mut proposals: HashMap<String, RenameEntry> = HashMap::new();
        if !recovered.is_empty() {
            let input: Vec<_> = map
                .tokens()
                .filter(|t| ctx.recovered.contains(*t))
                .map(|t| json!({ "token": t.name(), "context": ctx.per_token_window[t] }))
                .collect();
            let input = serde_json::to_string_pretty(&input).expect("json");
            let reply: RenameReply = self.ask("rename_placeholders", &input, |r: &RenameReply| {
                set_problems(
                    "token",
                    recovered.iter().copied(),
                    r.bindings.iter().map(|b| b.token.as_str()),
                )
            })?;
            proposals = reply.bindings.into_iter().map(|b| (b.token.clone(), b)).collect();
        }

        let mut bindings = Vec::with_capacity(map.len());
        for entry in &map.entries {
            let page = page_of(fields, &entry.field);
            let mut b = VariableBinding {
                token: Some(entry.token.clone()),
                field: entry.field.clone(),
                source: BindingSource::Placeholder,
                variable: String::new(),
                definition: String::new(),
                repeated: false,
                page,
                paired: None,
                label: None,
                flags: Vec::new(),
            };
            match proposals.get(entry.token.name()) {
                Some(p) => {
                    let violations = validate_variable(&p.variable, self.conv);
                    b.repeated = p.repeated;
                    if has_errors(&violations) {
                        b.flags.push(Flag::new(
                            FlagCode::InvalidName,
                            format!(
                                "proposed '{}': {}",
                                p.variable,
                                violations
                                    .iter()
                                    .map(|v| v.message.as_str())
                                    .collect::<Vec<_>>()
                                    .join("; ")
                            ),
                        ));
                        b.variable = synthetic_name(&b);
                    } else {
                        b.variable = p.variable.clone();
                        for v in violations {
                            b.flags.push(Flag::new(FlagCode::ConventionWarning, v.message));
                        }
                    }
                }
                None => {
                    b.source = BindingSource::Missing;
                    b.variable = synthetic_name(&b);
                    b.definition = unidentified("field", page);
                    b.flags.push(Flag::new(
                        FlagCode::NotRecovered,
                        format!("{} was not found in the OCR text", entry.token.braced()),
                    ));
                }
            }
            bindings.push(b);
        }
        quarantine_duplicates(&mut bindings);
        Ok(bindings)
    }

    /// Fills in definitions. Named placeholder bindings get the model's;
    /// everything else without one gets a stock description.
    pub fn write_definitions(
        &self,
        bindings: &mut [VariableBinding],
        ctx: &PlaceholderContext,
    ) -> Result<(), LlmError> {
        let mut wanted: Vec<(String, String, String)> = Vec::new();
        for b in bindings.iter() {
            if b.source != BindingSource::Placeholder || b.is_quarantined() || !b.definition.is_empty() {
                continue;
            }
            if wanted.iter().any(|(v, _, _)| *v == b.variable) {
                continue;
            }
            let token = b.token.as_ref().map(|t| t.name().to_string()).unwrap_or_default();
            let context = b
                .token
                .as_ref()
                .and_then(|t| ctx.per_token_window.get(t))
                .cloned()
                .unwrap_or_default();
            wanted.push((b.variable.clone(), token, context));
        }
        if !wanted.is_empty() {
            let input: Vec<_> = wanted
                .iter()
                .map(|(v, t, c)| json!({ "variable": v, "token": t, "context": c }))
                .collect();
            let input = serde_json::to_string_pretty(&input).expect("json");
            let reply: DefinitionsReply = self.ask("write_definitions", &input, |r: &DefinitionsReply| {
                set_problems(
                    "variable",
                    wanted.iter().map(|(v, _, _)| v.as_str()),
                    r.definitions.iter().map(|d| d.variable.as_str()),
                )?;
                match r.definitions.iter().find(|d| d.definition.trim().is_empty()) {
                    Some(d) => Err(format!("definition of '{}' is empty", d.variable)),
                    None => Ok(()),
                }
            })?;
            let defs: HashMap<String, String> = reply
                .definitions
                .into_iter()
                .map(|d| (d.variable, d.definition.trim().to_string()))
                .collect();
            for b in bindings.iter_mut() {
                if b.definition.is_empty()
                    && let Some(d) = defs.get(&b.variable)
                {
                    b.definition = d.clone();
                }
            }
        }
        for b in bindings.iter_mut().filter(|b| b.definition.is_empty()) {
            let kind = if b.source == BindingSource::Checkbox {
                "checkbox"
            } else {
                "field"
            };
            b.definition = unidentified(kind, b.page);
        }
        Ok(())
    }

    /// One question per distinct variable, grouped into screens.
    pub fn draft_questions(&self, bindings: &[VariableBinding]) -> Result<(Vec<QuestionSpec>, Vec<String>), LlmError> {
        let mut order: Vec<&VariableBinding> = Vec::new();
        for b in bindings {
            if !order.iter().any(|o| o.variable == b.variable) {
                order.push(b);
            }
        }
        if order.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        let input: Vec<_> = order
            .iter()
            .map(|b| {
                json!({
                    "variable": b.variable,
                    "definition": b.definition,
                    "kind": if b.source == BindingSource::Checkbox { "checkbox" } else { "field" },
                    "label": b.label,
                })
            })
            .collect();
        let input = serde_json::to_string_pretty(&input).expect("json");
        let reply: QuestionsReply = self.ask("draft_questions", &input, |r: &QuestionsReply| {
            set_problems(
                "variable",
                order.iter().map(|b| b.variable.as_str()),
                r.questions.iter().map(|q| q.variable.as_str()),
            )?;
            for q in &r.questions {
                if q.prompt.trim().is_empty() {
                    return Err(format!("question for '{}' has an empty prompt", q.variable));
                }
                if q.screen_id.trim().is_empty() {
                    return Err(format!("question for '{}' has no screen_id", q.variable));
                }
                if Datatype::lenient(&q.datatype).is_none() {
                    return Err(format!(
                        "datatype '{}' for '{}' is not one of text, area, yesno, number, currency, date, email, phone, zip",
                        q.datatype, q.variable
                    ));
                }
            }
            Ok(())
        })?;

        let mut warnings = Vec::new();
        let mut questions: Vec<QuestionSpec> = Vec::new();
        for q in reply.questions {
            let (mut datatype, mapped) = Datatype::lenient(&q.datatype).expect("checked");
            if mapped {
                warnings.push(format!(
                    "'{}': datatype '{}' read as {datatype}",
                    q.variable, q.datatype
                ));
            }
            let is_box = bindings
                .iter()
                .any(|b| b.variable == q.variable && b.source == BindingSource::Checkbox);
            if is_box && datatype != Datatype::Yesno {
                warnings.push(format!(
                    "'{}' fills a checkbox; datatype {datatype} changed to yesno",
                    q.variable
                ));
                datatype = Datatype::Yesno;
            }
            questions.push(QuestionSpec {
                variable: q.variable,
                prompt: q.prompt.trim().to_string(),
                datatype,
                screen_id: q.screen_id.trim().to_string(),
                screen_title: q.screen_title.trim().to_string(),
                help: q.help.filter(|h| !h.trim().is_empty()),
            });
        }
        group_screens(&mut questions, &mut warnings);
        Ok((questions, warnings))
    }

    /// Names small fields from the text beside them.
    pub fn pair_checkboxes(
        &self,
        small: &[FieldDescriptor],
        words: &[WordBox],
        params: &PairingParams,
    ) -> Result<Vec<VariableBinding>, LlmError> {
        let candidates = label_candidates(small, words, params);
        let labeled: Vec<&LabelCandidate> = candidates.iter().filter(|c| c.label.is_some()).collect();
        let mut replies: HashMap<String, CheckboxEntry> = HashMap::new();
        if !labeled.is_empty() {
            let input: Vec<_> = labeled
                .iter()
                .map(|c| json!({ "field": c.field, "label": c.label }))
                .collect();
            let input = serde_json::to_string_pretty(&input).expect("json");
            let reply: CheckboxReply = self.ask("pair_checkboxes", &input, |r: &CheckboxReply| {
                set_problems(
                    "field",
                    labeled.iter().map(|c| c.field.as_str()),
                    r.checkboxes.iter().map(|c| c.field.as_str()),
                )
            })?;
            replies = reply.checkboxes.into_iter().map(|c| (c.field.clone(), c)).collect();
        }

        let mut bindings = Vec::with_capacity(small.len());
        for cand in &candidates {
            let mut b = VariableBinding {
                token: None,
                field: cand.field.clone(),
                source: BindingSource::Checkbox,
                variable: String::new(),
                definition: String::new(),
                repeated: false,
                page: cand.page,
                paired: Some(false),
                label: cand.label.clone(),
                flags: Vec::new(),
            };
            match (cand.label.as_deref(), replies.get(&cand.field)) {
                (
                    Some(label),
                    Some(CheckboxEntry {
                        variable: Some(v),
                        definition,
                        ..
                    }),
                ) => {
                    let violations = validate_variable(v, self.conv);
                    if has_errors(&violations) {
                        b.flags.push(Flag::new(
                            FlagCode::InvalidName,
                            format!(
                                "proposed '{v}' for label '{label}': {}",
                                violations
                                    .iter()
                                    .map(|x| x.message.as_str())
                                    .collect::<Vec<_>>()
                                    .join("; ")
                            ),
                        ));
                    } else {
                        b.variable = v.clone();
                        b.paired = Some(true);
                        b.definition = definition
                            .as_deref()
                            .map(str::trim)
                            .filter(|d| !d.is_empty())
                            .map_or_else(|| format!("Checked if: {label}."), str::to_string);
                        for x in violations {
                            b.flags.push(Flag::new(FlagCode::ConventionWarning, x.message));
                        }
                    }
                }
                (Some(label), _) => {
                    b.flags.push(Flag::new(
                        FlagCode::Unpaired,
                        format!("the text '{label}' beside it did not identify the box"),
                    ));
                }
                (None, _) => {
                    b.flags.push(Flag::new(
                        FlagCode::Unpaired,
                        format!("no text within {} pt of the box", params.radius_pts),
                    ));
                }
            }
            if b.variable.is_empty() {
                b.variable = synthetic_name(&b);
            }
            bindings.push(b);
        }
        Ok(bindings)
    }
}

fn prefix(variable: &str) -> Option<&str> {
    variable.rsplit_once('.').map(|(p, _)| p)
}

/// Keeps variables with a shared path prefix on one screen and makes each
/// screen's questions contiguous, in order of first appearance.
fn group_screens(questions: &mut [QuestionSpec], warnings: &mut Vec<String>) {
    let mut home: HashMap<String, (String, String)> = HashMap::new();
    for q in questions.iter_mut() {
        let Some(p) = prefix(&q.variable) else { continue };
        match home.get(p) {
            Some((id, title)) if *id != q.screen_id => {
                warnings.push(format!(
                    "'{}' moved from screen '{}' to '{id}' with the rest of {p}",
                    q.variable, q.screen_id
                ));
                q.screen_id = id.clone();
                q.screen_title = title.clone();
            }
            Some(_) => {}
            None => {
                home.insert(p.to_string(), (q.screen_id.clone(), q.screen_title.clone()));
            }
        }
    }
    let mut first: Vec<String> = Vec::new();
    let mut titles: HashMap<String, String> = HashMap::new();
    for q in questions.iter() {
        if !first.contains(&q.screen_id) {
            first.push(q.screen_id.clone());
            titles.insert(q.screen_id.clone(), q.screen_title.clone());
        }
    }
    for q in questions.iter_mut() {
        q.screen_title = titles[&q.screen_id].clone();
    }
    questions.sort_by_key(|q| first.iter().position(|s| *s == q.screen_id));
}
