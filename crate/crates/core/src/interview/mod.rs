//! The interview definition: assembly from reviewed questions, the YAML
//! subset it is written as, filling, and the output bundle.

mod answers;
mod bundle;
mod fill;
mod yaml;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docx::DocxError;
use crate::llm::{DocMetadata, QuestionSpec, VariableBinding};
use crate::pdf::PdfError;

pub use answers::{Answer, AnswerSet, DatatypeOverride, normalize_datatypes, validate_answer};
pub use bundle::{BUNDLE_INTERVIEW, bundle_files, next_steps_stub, write_bundle};
pub use fill::{Filled, run_fill};
pub use yaml::{emit_yaml, parse_yaml};

/// Fixed screens before the questions.
pub const SKELETON_BEFORE: [&str; 2] = ["title", "before_you_start"];
/// Fixed screens after the questions.
pub const SKELETON_AFTER: [&str; 4] = ["preview", "review", "signature", "download"];

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("question for '{variable}' on screen '{screen}' does not match any template variable")]
    UnboundVariable { variable: String, screen: String },
    #[error("'{variable}' is asked on screen '{first}' and again on '{second}'")]
    DuplicateVariable {
        variable: String,
        first: String,
        second: String,
    },
    #[error("template variables without a question: {}", .0.join(", "))]
    Unasked(Vec<String>),
}

#[derive(Debug, Error)]
pub enum InterviewError {
    #[error("interview YAML: {0}")]
    Yaml(String),
    #[error("missing answers for: {}", .0.join(", "))]
    MissingAnswer(Vec<String>),
    #[error("invalid answers: {}", .0.iter().map(|(v, m)| format!("{v} ({m})")).collect::<Vec<_>>().join("; "))]
    ValidationFailure(Vec<(String, String)>),
    #[error("template does not match the interview: {0}")]
    TemplateMismatch(String),
    #[error(transparent)]
    Pdf(#[from] PdfError),
    #[error(transparent)]
    Docx(#[from] DocxError),
    #[error("bundle: {0}")]
    Bundle(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screen {
    pub screen_id: String,
    pub title: String,
    pub questions: Vec<QuestionSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Pdf,
    Docx,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRef {
    pub kind: TemplateKind,
    /// File name inside the bundle's template folder.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewSpec {
    pub metadata: DocMetadata,
    /// Question screens only; the skeleton is implied.
    pub screens: Vec<Screen>,
    pub template: TemplateRef,
    /// PDF field name to variable. Empty for DOCX templates, which name
    /// their variables directly.
    pub field_map: BTreeMap<String, String>,
}

impl InterviewSpec {
    /// Every screen id in display order, skeleton included.
    pub fn screen_order(&self) -> Vec<String> {
        SKELETON_BEFORE
            .iter()
            .map(|s| s.to_string())
            .chain(self.screens.iter().map(|s| s.screen_id.clone()))
            .chain(SKELETON_AFTER.iter().map(|s| s.to_string()))
            .collect()
    }

    pub fn questions(&self) -> impl Iterator<Item = &QuestionSpec> {
        self.screens.iter().flat_map(|s| &s.questions)
    }

    pub fn variables(&self) -> Vec<&str> {
        self.questions().map(|q| q.variable.as_str()).collect()
    }

    pub fn question(&self, variable: &str) -> Option<&QuestionSpec> {
        self.questions().find(|q| q.variable == variable)
    }
}

/// What the interview fills.
#[derive(Debug, Clone, Copy)]
pub enum TemplateSource<'a> {
    Pdf {
        path: &'a str,
        bindings: &'a [VariableBinding],
    },
    Docx {
        path: &'a str,
        variables: &'a [String],
    },
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub spec: InterviewSpec,
    pub yaml: String,
    pub overrides: Vec<DatatypeOverride>,
    pub warnings: Vec<String>,
}

/// The variable a template expression refers to, without filters.
pub fn expression_variable(expr: &str) -> &str {
    expr.split('|').next().unwrap_or("").trim()
}

/// Builds the interview from reviewed questions. Screens keep the order in
/// which they first appear; datatype guards are applied again.
pub fn assemble(
    metadata: DocMetadata,
    questions: Vec<QuestionSpec>,
    template: TemplateSource<'_>,
) -> Result<Assembled, AssembleError> {
    let mut warnings = Vec::new();
    let (template_ref, field_map, template_vars, definitions) = match template {
        TemplateSource::Pdf { path, bindings } => {
            let field_map: BTreeMap<String, String> =
                bindings.iter().map(|b| (b.field.clone(), b.variable.clone())).collect();
            let mut vars = Vec::new();
            for b in bindings {
                if !vars.contains(&b.variable) {
                    vars.push(b.variable.clone());
                }
            }
            let defs = bindings
                .iter()
                .map(|b| (b.variable.clone(), b.definition.clone()))
                .collect();
            let r = TemplateRef {
                kind: TemplateKind::Pdf,
                path: path.to_string(),
            };
            (r, field_map, vars, defs)
        }
        TemplateSource::Docx { path, variables } => {
            let mut vars: Vec<String> = Vec::new();
            for v in variables {
                let v = expression_variable(v).to_string();
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            let r = TemplateRef {
                kind: TemplateKind::Docx,
                path: path.to_string(),
            };
            (r, BTreeMap::new(), vars, BTreeMap::new())
        }
    };

    let mut questions = questions;
    let overrides = normalize_datatypes(&mut questions, &definitions);
    for o in &overrides {
        warnings.push(format!(
            "{}: datatype {} changed to {} ({})",
            o.variable, o.from, o.to, o.reason
        ));
    }

    let bound: BTreeSet<&str> = template_vars.iter().map(String::as_str).collect();
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    let mut screens: Vec<Screen> = Vec::new();
    for mut q in questions {
        if !bound.contains(q.variable.as_str()) {
            return Err(AssembleError::UnboundVariable {
                variable: q.variable,
                screen: q.screen_id,
            });
        }
        if SKELETON_BEFORE.contains(&q.screen_id.as_str()) || SKELETON_AFTER.contains(&q.screen_id.as_str()) {
            let renamed = format!("{}_questions", q.screen_id);
            warnings.push(format!(
                "screen id '{}' is reserved for a fixed screen; using '{renamed}'",
                q.screen_id
            ));
            q.screen_id = renamed;
        }
        if let Some(first) = seen.get(&q.variable) {
            return Err(AssembleError::DuplicateVariable {
                variable: q.variable.clone(),
                first: first.clone(),
                second: q.screen_id,
            });
        }
        seen.insert(q.variable.clone(), q.screen_id.clone());
        q.help = q.help.filter(|h| !h.trim().is_empty());
        match screens.iter_mut().find(|s| s.screen_id == q.screen_id) {
            Some(s) => {
                q.screen_title = s.title.clone();
                s.questions.push(q);
            }
            None => screens.push(Screen {
                screen_id: q.screen_id.clone(),
                title: q.screen_title.clone(),
                questions: vec![q],
            }),
        }
    }
    let unasked: Vec<String> = template_vars.into_iter().filter(|v| !seen.contains_key(v)).collect();
    if !unasked.is_empty() {
        return Err(AssembleError::Unasked(unasked));
    }
    if screens.is_empty() {
        warnings.push("no questions; the interview has only its fixed screens".into());
    }

    let spec = InterviewSpec {
        metadata,
        screens,
        template: template_ref,
        field_map,
    };
    let yaml = emit_yaml(&spec);
    Ok(Assembled {
        spec,
        yaml,
        overrides,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{BindingSource, Datatype};

    fn meta() -> DocMetadata {
        DocMetadata {
            title: "Complaint".into(),
            description: "A test form.".into(),
        }
    }

    fn q(variable: &str, datatype: Datatype, screen: &str) -> QuestionSpec {
        QuestionSpec {
            variable: variable.into(),
            prompt: format!("{variable}?"),
            datatype,
            screen_id: screen.into(),
            screen_title: screen.to_uppercase(),
            help: None,
        }
    }

    fn binding(field: &str, variable: &str) -> VariableBinding {
        VariableBinding {
            token: None,
            field: field.into(),
            source: BindingSource::Placeholder,
            variable: variable.into(),
            definition: String::new(),
            repeated: false,
            page: 0,
            paired: None,
            label: None,
            flags: vec![],
        }
    }

    #[test]
    fn screens_group_and_guards_apply() {
        let bindings = [binding("a", "name"), binding("b", "mailing_zip"), binding("c", "age")];
        let qs = vec![
            q("name", Datatype::Text, "one"),
            q("mailing_zip", Datatype::Number, "two"),
            q("age", Datatype::Number, "one"),
        ];
        let out = assemble(
            meta(),
            qs,
            TemplateSource::Pdf {
                path: "form.pdf",
                bindings: &bindings,
            },
        )
        .unwrap();
        let ids: Vec<&str> = out.spec.screens.iter().map(|s| s.screen_id.as_str()).collect();
        assert_eq!(ids, ["one", "two"]);
        assert_eq!(out.spec.screens[0].questions.len(), 2);
        assert_eq!(out.spec.question("mailing_zip").unwrap().datatype, Datatype::Zip);
        assert_eq!(out.overrides.len(), 1);
        assert_eq!(out.spec.field_map["b"], "mailing_zip");
        assert_eq!(
            out.spec.screen_order(),
            [
                "title",
                "before_you_start",
                "one",
                "two",
                "preview",
                "review",
                "signature",
                "download"
            ]
        );
    }

    #[test]
    fn unbound_duplicate_and_unasked() {
        let bindings = [binding("a", "name"), binding("b", "age")];
        let src = TemplateSource::Pdf {
            path: "f.pdf",
            bindings: &bindings,
        };
        let err = assemble(meta(), vec![q("nmae", Datatype::Text, "s")], src).unwrap_err();
        assert!(matches!(err, AssembleError::UnboundVariable { ref variable, .. } if variable == "nmae"));
        let err = assemble(
            meta(),
            vec![
                q("name", Datatype::Text, "s"),
                q("age", Datatype::Number, "s"),
                q("name", Datatype::Text, "t"),
            ],
            src,
        )
        .unwrap_err();
        assert!(matches!(err, AssembleError::DuplicateVariable { ref second, .. } if second == "t"));
        let err = assemble(meta(), vec![q("name", Datatype::Text, "s")], src).unwrap_err();
        assert!(matches!(err, AssembleError::Unasked(ref v) if v == &["age".to_string()]));
    }

    #[test]
    fn degenerate_interview_is_skeleton_only() {
        let out = assemble(
            meta(),
            vec![],
            TemplateSource::Docx {
                path: "t.docx",
                variables: &[],
            },
        )
        .unwrap();
        assert!(out.spec.screens.is_empty());
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.spec.screen_order().len(), 6);
    }

    #[test]
    fn reserved_screen_ids_are_renamed() {
        let vars = vec!["signature_date | date".to_string()];
        let out = assemble(
            meta(),
            vec![q("signature_date", Datatype::Date, "signature")],
            TemplateSource::Docx {
                path: "t.docx",
                variables: &vars,
            },
        )
        .unwrap();
        assert_eq!(out.spec.screens[0].screen_id, "signature_questions");
    }
}
