//! Reviewer edits: JSON-pointer patches on a gate payload, validated before
//! they are written.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BindingsPayload, Pipeline, PipelineError, QuestionsPayload, STATE_FILE, Stage, from_json};
use crate::llm::{
    BindingSource, Datatype, FlagCode, NamingConventions, Severity, VariableBinding, synthetic_name, validate_variable,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointerViolation {
    pub pointer: String,
    pub message: String,
    pub severity: Severity,
}

impl PointerViolation {
    fn error(pointer: String, message: impl Into<String>) -> Self {
        Self {
            pointer,
            message: message.into(),
            severity: Severity::Error,
        }
    }

    fn warning(pointer: String, message: impl Into<String>) -> Self {
        Self {
            pointer,
            message: message.into(),
            severity: Severity::Warning,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchOp {
    /// JSON pointer into the stage payload.
    pub path: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRequest {
    pub patch: Vec<PatchOp>,
    pub base_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub payload: Value,
    pub warnings: Vec<PointerViolation>,
    pub version: String,
}

/// Naming and uniqueness problems in a bindings payload.
pub fn validate_bindings(p: &BindingsPayload, conv: &NamingConventions) -> Vec<PointerViolation> {
    let mut out = Vec::new();
    if p.metadata.title.trim().is_empty() {
        out.push(PointerViolation::error("/metadata/title".into(), "title is empty"));
    }
    if p.metadata.description.trim().is_empty() {
        out.push(PointerViolation::error(
            "/metadata/description".into(),
            "description is empty",
        ));
    }
    let mut users: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut fields = BTreeSet::new();
    for (i, b) in p.bindings.iter().enumerate() {
        let at = |f: &str| format!("/bindings/{i}/{f}");
        if !fields.insert(b.field.as_str()) {
            out.push(PointerViolation::error(
                at("field"),
                format!("field '{}' is bound twice", b.field),
            ));
        }
        for v in validate_variable(&b.variable, conv) {
            out.push(PointerViolation {
                pointer: at("variable"),
                message: v.message,
                severity: v.severity,
            });
        }
        if b.definition.trim().is_empty() {
            out.push(PointerViolation::warning(at("definition"), "definition is empty"));
        }
        if b.is_quarantined() {
            let codes: Vec<String> = b
                .flags
                .iter()
                .map(|f| {
                    serde_json::to_value(f.code)
                        .expect("codes serialize")
                        .as_str()
                        .unwrap_or("")
                        .to_string()
                })
                .collect();
            out.push(PointerViolation::warning(
                at("variable"),
                format!("'{}' still needs a name ({})", b.variable, codes.join(", ")),
            ));
        }
        users.entry(b.variable.as_str()).or_default().push(i);
    }
    for (variable, idx) in users {
        if idx.len() > 1 && !idx.iter().all(|&i| p.bindings[i].repeated) {
            for &i in &idx {
                out.push(PointerViolation::error(
                    format!("/bindings/{i}/variable"),
                    format!(
                        "'{variable}' is used by {} fields; mark all of them repeated or rename",
                        idx.len()
                    ),
                ));
            }
        }
    }
    out
}

fn is_screen_id(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some('a'..='z')) && c.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

/// Questions must cover every bound variable exactly once.
pub fn validate_questions(p: &QuestionsPayload, bindings: &[VariableBinding]) -> Vec<PointerViolation> {
    let mut out = Vec::new();
    let bound: BTreeSet<&str> = bindings.iter().map(|b| b.variable.as_str()).collect();
    let boxes: BTreeSet<&str> = bindings
        .iter()
        .filter(|b| b.source == BindingSource::Checkbox)
        .map(|b| b.variable.as_str())
        .collect();
    let mut asked: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, q) in p.questions.iter().enumerate() {
        let at = |f: &str| format!("/questions/{i}/{f}");
        if !bound.contains(q.variable.as_str()) {
            out.push(PointerViolation::error(
                at("variable"),
                format!("'{}' is not a bound variable", q.variable),
            ));
        }
        if let Some(first) = asked.insert(q.variable.as_str(), i) {
            out.push(PointerViolation::error(
                at("variable"),
                format!("'{}' is already asked by question {first}", q.variable),
            ));
        }
        if q.prompt.trim().is_empty() {
            out.push(PointerViolation::error(at("prompt"), "prompt is empty"));
        }
        if !is_screen_id(&q.screen_id) {
            out.push(PointerViolation::error(
                at("screen_id"),
                format!(
                    "'{}' is not a screen id; use lowercase letters, digits and '_'",
                    q.screen_id
                ),
            ));
        }
        if boxes.contains(q.variable.as_str()) && q.datatype != Datatype::Yesno {
            out.push(PointerViolation::error(
                at("datatype"),
                format!("'{}' fills a checkbox and must be yesno", q.variable),
            ));
        }
    }
    for v in bound.difference(&asked.keys().copied().collect()) {
        out.push(PointerViolation::error(
            "/questions".into(),
            format!("no question asks for '{v}'"),
        ));
    }
    out
}

/// Clears quarantine flags from bindings a reviewer has renamed and
/// recomputes convention warnings.
pub fn refresh_flags(p: &mut BindingsPayload, conv: &NamingConventions) {
    for b in &mut p.bindings {
        let renamed = b.variable != synthetic_name(b);
        b.flags.retain(|f| match f.code {
            FlagCode::ConventionWarning => false,
            _ => !renamed,
        });
        for v in validate_variable(&b.variable, conv) {
            if v.severity == Severity::Warning {
                b.flags
                    .push(crate::llm::Flag::new(FlagCode::ConventionWarning, v.message));
            }
        }
    }
}

fn set_pointer(root: &mut Value, pointer: &str, value: Value) -> Result<(), String> {
    if pointer.is_empty() {
        *root = value;
        return Ok(());
    }
    let (parent, last) = pointer.rsplit_once('/').ok_or("a pointer starts with '/'")?;
    let last = last.replace("~1", "/").replace("~0", "~");
    let target = root.pointer_mut(parent).ok_or("no such location")?;
    match target {
        Value::Object(map) => {
            map.insert(last, value);
            Ok(())
        }
        Value::Array(items) if last == "-" => {
            items.push(value);
            Ok(())
        }
        Value::Array(items) => {
            let i: usize = last.parse().map_err(|_| format!("'{last}' is not an array index"))?;
            let slot = items.get_mut(i).ok_or_else(|| format!("index {i} is past the end"))?;
            *slot = value;
            Ok(())
        }
        _ => Err("the parent is not an object or array".into()),
    }
}

fn rebase(e: PipelineError) -> PipelineError {
    match e {
        PipelineError::SchemaViolation { pointer, message, .. } => {
            PipelineError::Invalid(vec![PointerViolation::error(pointer, message)])
        }
        other => other,
    }
}

impl Pipeline {
    /// Applies a reviewer's edit to the draft waiting at `stage`. Nothing is
    /// written unless the result validates.
    pub fn edit(&mut self, stage: Stage, req: &EditRequest) -> Result<EditOutcome, PipelineError> {
        if req.base_version != self.version {
            return Err(PipelineError::VersionConflict {
                expected: req.base_version.clone(),
                actual: self.version.clone(),
            });
        }
        if !stage.is_gate() || self.state.stage != stage {
            return Err(PipelineError::StageOrder(format!(
                "only the draft waiting for review can be edited; the run is at {}",
                self.state.stage
            )));
        }
        let mut value = self.state.payload(stage).expect("current stage has a payload");
        for op in &req.patch {
            set_pointer(&mut value, &op.path, op.value.clone())
                .map_err(|m| PipelineError::Invalid(vec![PointerViolation::error(op.path.clone(), m)]))?;
        }
        let text = value.to_string();
        let violations = match stage {
            Stage::BindingsDraft => {
                let mut p: BindingsPayload = from_json(STATE_FILE, &text).map_err(rebase)?;
                refresh_flags(&mut p, &self.conv);
                let v = validate_bindings(&p, &self.conv);
                if !v.iter().any(PointerViolation::is_error) {
                    self.state.payloads.bindings = Some(p);
                }
                v
            }
            Stage::QuestionsDraft => {
                let p: QuestionsPayload = from_json(STATE_FILE, &text).map_err(rebase)?;
                let bindings = &self
                    .state
                    .payloads
                    .bindings
                    .as_ref()
                    .expect("bindings precede questions")
                    .bindings;
                let v = validate_questions(&p, bindings);
                if !v.iter().any(PointerViolation::is_error) {
                    self.state.payloads.questions = Some(p);
                }
                v
            }
            _ => unreachable!("checked above"),
        };
        let (errors, warnings): (Vec<_>, Vec<_>) = violations.into_iter().partition(PointerViolation::is_error);
        if !errors.is_empty() {
            return Err(PipelineError::Invalid(errors));
        }
        let paths: Vec<&str> = req.patch.iter().map(|p| p.path.as_str()).collect();
        self.audit(stage, "edited", paths.join(", "));
        self.save()?;
        Ok(EditOutcome {
            payload: self.state.payload(stage).expect("just written"),
            warnings,
            version: self.version.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointers() {
        let mut v = serde_json::json!({"a": [{"b": 1}, {"b": 2}], "c/d": 0});
        set_pointer(&mut v, "/a/1/b", 5.into()).unwrap();
        set_pointer(&mut v, "/a/0/new", "x".into()).unwrap();
        set_pointer(&mut v, "/c~1d", 9.into()).unwrap();
        set_pointer(&mut v, "/a/-", 7.into()).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"a": [{"b": 1, "new": "x"}, {"b": 5}, 7], "c/d": 9})
        );
        assert!(set_pointer(&mut v, "/a/9", 0.into()).is_err());
        assert!(set_pointer(&mut v, "/zz/q", 0.into()).is_err());
        assert!(set_pointer(&mut v, "nope", 0.into()).is_err());
    }
}
