//! Prompt templates with `${slot}` substitution.

use std::collections::BTreeMap;
use std::path::Path;

use super::LlmError;

const BUNDLED: &[(&str, &str)] = &[
    ("system", include_str!("../../prompts/system.txt")),
    ("label_docx", include_str!("../../prompts/label_docx.txt")),
    ("doc_metadata", include_str!("../../prompts/doc_metadata.txt")),
    (
        "rename_placeholders",
        include_str!("../../prompts/rename_placeholders.txt"),
    ),
    ("write_definitions", include_str!("../../prompts/write_definitions.txt")),
    ("draft_questions", include_str!("../../prompts/draft_questions.txt")),
    ("pair_checkboxes", include_str!("../../prompts/pair_checkboxes.txt")),
    ("repair", include_str!("../../prompts/repair.txt")),
];

#[derive(Debug, Clone)]
pub struct Prompts {
    templates: BTreeMap<String, String>,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            templates: BUNDLED.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl Prompts {
    /// Bundled templates, replaced by any `NAME.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, LlmError> {
        let mut prompts = Self::default();
        for (name, _) in BUNDLED {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let text =
                    std::fs::read_to_string(&path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
                prompts.templates.insert(name.to_string(), text);
            }
        }
        Ok(prompts)
    }

    pub fn render(&self, name: &str, slots: &[(&str, &str)]) -> Result<String, LlmError> {
        let template = self
            .templates
            .get(name)
            .ok_or_else(|| LlmError::Config(format!("no prompt template '{name}'")))?;
        let mut out = String::with_capacity(template.len());
        let mut rest = template.as_str();
        while let Some(at) = rest.find("${") {
            out.push_str(&rest[..at]);
            let after = &rest[at + 2..];
            let end = after
                .find('}')
                .ok_or_else(|| LlmError::Config(format!("prompt '{name}': unterminated slot")))?;
            let slot = &after[..end];
            let value = slots
                .iter()
                .find(|(k, _)| *k == slot)
                .ok_or_else(|| LlmError::Config(format!("prompt '{name}': no value for slot '{slot}'")))?;
            out.push_str(value.1);
            rest = &after[end + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}
