use std::collections::BTreeMap;

use super::{Answer, AnswerSet, InterviewError, InterviewSpec, TemplateKind, expression_variable, validate_answer};
use crate::docx::render_placeholders;
use crate::llm::Datatype;
use crate::pdf::{FieldKind, FieldValue, enumerate_fields, fill_fields};

#[derive(Debug, Clone)]
pub struct Filled {
    pub bytes: Vec<u8>,
    pub warnings: Vec<String>,
}

/// Fills the template with validated answers. Every question must be
/// answered; all missing and all invalid answers are reported together.
pub fn run_fill(spec: &InterviewSpec, answers: &AnswerSet, template: &[u8]) -> Result<Filled, InterviewError> {
    let missing: Vec<String> = spec
        .variables()
        .into_iter()
        .filter(|v| !answers.contains_key(*v))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(InterviewError::MissingAnswer(missing));
    }
    let invalid: Vec<(String, String)> = spec
        .questions()
        .filter_map(|q| {
            validate_answer(&answers[&q.variable], q.datatype)
                .err()
                .map(|m| (q.variable.clone(), m))
        })
        .collect();
    if !invalid.is_empty() {
        return Err(InterviewError::ValidationFailure(invalid));
    }
    let mut warnings: Vec<String> = answers
        .keys()
        .filter(|k| spec.question(k).is_none())
        .map(|k| format!("answer for '{k}' is not asked by the interview and was ignored"))
        .collect();

    match spec.template.kind {
        TemplateKind::Pdf => {
            let kinds: BTreeMap<String, FieldKind> = enumerate_fields(template)?
                .fields
                .into_iter()
                .map(|f| (f.name, f.kind))
                .collect();
            let mut values = BTreeMap::new();
            for (field, variable) in &spec.field_map {
                let kind = kinds
                    .get(field)
                    .ok_or_else(|| InterviewError::TemplateMismatch(format!("the PDF has no field '{field}'")))?;
                let answer = &answers[variable];
                let yesno = spec.question(variable).map(|q| q.datatype) == Some(Datatype::Yesno);
                let value = match (kind, answer.as_bool()) {
                    (FieldKind::Checkbox, Some(b)) => FieldValue::Bool(b),
                    (FieldKind::Checkbox, None) => {
                        return Err(InterviewError::TemplateMismatch(format!(
                            "'{variable}' fills checkbox '{field}' but its answer is not yes or no"
                        )));
                    }
                    (FieldKind::Radio, Some(b)) if yesno => FieldValue::Bool(b),
                    (_, Some(b)) if yesno => FieldValue::Text(Answer::Bool(b).to_string()),
                    _ => FieldValue::Text(answer.to_string()),
                };
                values.insert(field.clone(), value);
            }
            Ok(Filled {
                bytes: fill_fields(template, &values)?,
                warnings,
            })
        }
        TemplateKind::Docx => {
            let lookup = |expr: &str| {
                let variable = expression_variable(expr);
                let q = spec.question(variable)?;
                let answer = &answers[variable];
                Some(match (q.datatype, answer.as_bool()) {
                    (Datatype::Yesno, Some(b)) => Answer::Bool(b).to_string(),
                    _ => answer.to_string(),
                })
            };
            let out = render_placeholders(template, &lookup)?;
            warnings.extend(out.warnings);
            Ok(Filled {
                bytes: out.bytes,
                warnings,
            })
        }
    }
}
