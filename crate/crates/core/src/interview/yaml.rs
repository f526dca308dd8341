//! The interview as a Docassemble-style YAML subset: one document per block.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{InterviewError, InterviewSpec, SKELETON_AFTER, SKELETON_BEFORE, Screen, TemplateKind, TemplateRef};
use crate::llm::{DocMetadata, QuestionSpec};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Block {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<DocMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subquestion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fields: Option<Vec<FieldItem>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    review: Option<Vec<ReviewItem>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attachment: Option<Attachment>,
    #[serde(default, rename = "continue button field", skip_serializing_if = "Option::is_none")]
    continue_button_field: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldItem {
    label: String,
    field: String,
    datatype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    help: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReviewItem {
    #[serde(rename = "Edit")]
    edit: String,
    button: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Attachment {
    name: String,
    filename: String,
    #[serde(default, rename = "pdf template file", skip_serializing_if = "Option::is_none")]
    pdf_template_file: Option<String>,
    #[serde(default, rename = "docx template file", skip_serializing_if = "Option::is_none")]
    docx_template_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fields: Option<BTreeMap<String, String>>,
}

const SIGNATURE_VARIABLE: &str = "users[0].signature";

fn header(spec: &InterviewSpec) -> String {
    let mut h = String::from(
        "# Interview draft. Review every block before publishing.\n\
         #\n\
         # Objects and the interview order are left for hand-finishing, for example:\n\
         #\n\
         #   objects:\n\
         #     - users: ALPeopleList.using(there_are_any=True)\n\
         #   ---\n\
         #   mandatory: True\n\
         #   code: |\n",
    );
    let order = ["intro_seen".to_string(), "before_you_start_seen".to_string()]
        .into_iter()
        .chain(spec.variables().into_iter().map(str::to_string))
        .chain(["preview_seen", "review_seen", SIGNATURE_VARIABLE, "download_seen"].map(String::from));
    for v in order {
        let _ = writeln!(h, "#     {v}");
    }
    h.push_str(
        "#\n\
         # CONDITIONAL LOGIC\n\
         # Add `show if` modifiers and code blocks here. Nothing in this section is generated.\n\
         #\n",
    );
    h
}

fn slug(title: &str) -> String {
    let mut out = String::new();
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_end_matches('_');
    if out.is_empty() {
        "form".into()
    } else {
        out.chars().take(60).collect()
    }
}

fn blocks(spec: &InterviewSpec) -> Vec<Block> {
    let mut out = vec![
        Block {
            metadata: Some(spec.metadata.clone()),
            ..Default::default()
        },
        Block {
            id: Some(SKELETON_BEFORE[0].into()),
            question: Some(spec.metadata.title.clone()),
            subquestion: Some(spec.metadata.description.clone()),
            continue_button_field: Some("intro_seen".into()),
            ..Default::default()
        },
        Block {
            id: Some(SKELETON_BEFORE[1].into()),
            question: Some("Before you start".into()),
            subquestion: Some(
                "This interview takes about 10 minutes. Have your case papers and your contact details ready.".into(),
            ),
            continue_button_field: Some("before_you_start_seen".into()),
            ..Default::default()
        },
    ];
    for screen in &spec.screens {
        out.push(Block {
            id: Some(screen.screen_id.clone()),
            question: Some(screen.title.clone()),
            fields: Some(
                screen
                    .questions
                    .iter()
                    .map(|q| FieldItem {
                        label: q.prompt.clone(),
                        field: q.variable.clone(),
                        datatype: q.datatype.to_string(),
                        help: q.help.clone(),
                    })
                    .collect(),
            ),
            ..Default::default()
        });
    }
    let (pdf, docx, fields) = match spec.template.kind {
        TemplateKind::Pdf => (
            Some(spec.template.path.clone()),
            None,
            Some(
                spec.field_map
                    .iter()
                    .map(|(f, v)| (f.clone(), format!("${{ {v} }}")))
                    .collect(),
            ),
        ),
        TemplateKind::Docx => (None, Some(spec.template.path.clone()), None),
    };
    out.extend([
        Block {
            id: Some(SKELETON_AFTER[0].into()),
            question: Some("Preview your form".into()),
            subquestion: Some("Check the draft below before you continue.".into()),
            continue_button_field: Some("preview_seen".into()),
            ..Default::default()
        },
        Block {
            id: Some(SKELETON_AFTER[1].into()),
            question: Some("Review your answers".into()),
            review: Some(
                spec.questions()
                    .map(|q| ReviewItem {
                        edit: q.variable.clone(),
                        button: format!("{}: ${{ {} }}", q.prompt, q.variable),
                    })
                    .collect(),
            ),
            continue_button_field: Some("review_seen".into()),
            ..Default::default()
        },
        Block {
            id: Some(SKELETON_AFTER[2].into()),
            question: Some("Sign your form".into()),
            signature: Some(SIGNATURE_VARIABLE.into()),
            ..Default::default()
        },
        Block {
            id: Some(SKELETON_AFTER[3].into()),
            question: Some("Your form is ready".into()),
            subquestion: Some("Download it below.".into()),
            attachment: Some(Attachment {
                name: spec.metadata.title.clone(),
                filename: slug(&spec.metadata.title),
                pdf_template_file: pdf,
                docx_template_file: docx,
                fields,
            }),
            continue_button_field: Some("download_seen".into()),
            ..Default::default()
        },
    ]);
    out
}

/// Writes the interview. The output is deterministic for a given spec.
pub fn emit_yaml(spec: &InterviewSpec) -> String {
    let mut out = header(spec);
    for (i, block) in blocks(spec).iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        out.push_str(&serde_yaml::to_string(block).expect("blocks serialize"));
    }
    out
}

fn err(msg: impl Into<String>) -> InterviewError {
    InterviewError::Yaml(msg.into())
}

fn expect_id(blocks: &[Block], at: usize, id: &str) -> Result<(), InterviewError> {
    match blocks.get(at).and_then(|b| b.id.as_deref()) {
        Some(found) if found == id => Ok(()),
        Some(found) => Err(err(format!("block {} should be '{id}', found '{found}'", at + 1))),
        None => Err(err(format!("block {} should be '{id}'", at + 1))),
    }
}

fn unwrap_expression(value: &str) -> Option<&str> {
    value.strip_prefix("${")?.strip_suffix('}').map(str::trim)
}

/// Reads an interview written by [`emit_yaml`], checking the skeleton order.
pub fn parse_yaml(text: &str) -> Result<InterviewSpec, InterviewError> {
    let mut blocks = Vec::new();
    for doc in serde_yaml::Deserializer::from_str(text) {
        blocks.push(Block::deserialize(doc).map_err(|e| err(e.to_string()))?);
    }
    let metadata = blocks
        .first()
        .and_then(|b| b.metadata.clone())
        .ok_or_else(|| err("the first block must be metadata"))?;
    let mut at = 1;
    for id in SKELETON_BEFORE {
        expect_id(&blocks, at, id)?;
        at += 1;
    }

    let mut screens = Vec::new();
    while let Some(fields) = blocks.get(at).and_then(|b| b.fields.as_ref()) {
        let b = &blocks[at];
        let screen_id = b.id.clone().ok_or_else(|| err(format!("block {} has no id", at + 1)))?;
        let title = b.question.clone().unwrap_or_default();
        let mut questions = Vec::with_capacity(fields.len());
        for f in fields {
            questions.push(QuestionSpec {
                variable: f.field.clone(),
                prompt: f.label.clone(),
                datatype: f.datatype.parse().map_err(err)?,
                screen_id: screen_id.clone(),
                screen_title: title.clone(),
                help: f.help.clone(),
            });
        }
        screens.push(Screen {
            screen_id,
            title,
            questions,
        });
        at += 1;
    }

    for id in SKELETON_AFTER {
        expect_id(&blocks, at, id)?;
        at += 1;
    }
    if blocks.len() != at {
        return Err(err(format!(
            "{} unexpected block(s) after '{}'",
            blocks.len() - at,
            SKELETON_AFTER[3]
        )));
    }

    let asked: Vec<&str> = screens
        .iter()
        .flat_map(|s: &Screen| s.questions.iter().map(|q| q.variable.as_str()))
        .collect();
    let review = blocks[at - 3].review.as_deref().unwrap_or_default();
    let reviewed: Vec<&str> = review.iter().map(|r| r.edit.as_str()).collect();
    if reviewed != asked {
        return Err(err("the review block must list every question variable in order"));
    }

    let attachment = blocks[at - 1]
        .attachment
        .as_ref()
        .ok_or_else(|| err("the download block has no attachment"))?;
    let template = match (&attachment.pdf_template_file, &attachment.docx_template_file) {
        (Some(p), None) => TemplateRef {
            kind: TemplateKind::Pdf,
            path: p.clone(),
        },
        (None, Some(d)) => TemplateRef {
            kind: TemplateKind::Docx,
            path: d.clone(),
        },
        _ => return Err(err("the attachment needs exactly one of pdf or docx template file")),
    };
    let mut field_map = BTreeMap::new();
    for (field, value) in attachment.fields.iter().flatten() {
        let v = unwrap_expression(value).ok_or_else(|| err(format!("field '{field}': expected ${{ variable }}")))?;
        field_map.insert(field.clone(), v.to_string());
    }
    Ok(InterviewSpec {
        metadata,
        screens,
        template,
        field_map,
    })
}
