#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use formdraft::fixtures::pdf::{FORM14_BOXES, FORM14_TEXT};
use formdraft::llm::Mode;
use formdraft::pdf::FieldValue;
use formdraft::pipeline::{Config, Pipeline, TRANSCRIPT_FILE};
use proptest::prelude::*;

pub const FORM14_EDIT_FROM: &str = "unknown_field_07";
pub const FORM14_EDIT_TO: &str = "users[0].phone_number";

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/form14")
}

pub fn form14_pdf() -> PathBuf {
    fixture_dir().join("form14.pdf")
}

pub fn replay_config() -> Config {
    Config::offline(&fixture_dir())
}

pub fn record_config() -> Config {
    Config {
        mode: Mode::Record,
        ..Config::offline(&fixture_dir())
    }
}

/// A new run in `dir` seeded with the recorded transcript.
pub fn replay_run(dir: &Path) -> Pipeline {
    fs::create_dir_all(dir).unwrap();
    fs::copy(fixture_dir().join(TRANSCRIPT_FILE), dir.join(TRANSCRIPT_FILE)).unwrap();
    Pipeline::create(dir, &form14_pdf(), replay_config()).unwrap()
}

pub fn zip_entries(bytes: &[u8]) -> Vec<(String, Vec<u8>)> {
    use std::io::Read;
    let mut archive = zip::ZipArchive::new(std::io::Cursor::new(bytes)).unwrap();
    (0..archive.len())
        .map(|i| {
            let mut f = archive.by_index(i).unwrap();
            let mut data = Vec::new();
            f.read_to_end(&mut data).unwrap();
            (f.name().unwrap().to_string(), data)
        })
        .collect()
}

fn canonical(node: roxmltree::Node, out: &mut String) {
    if node.is_text() {
        out.push_str(node.text().unwrap_or(""));
        return;
    }
    if !node.is_element() {
        return;
    }
    let name = node.tag_name();
    out.push_str(&format!("<{{{}}}{}", name.namespace().unwrap_or(""), name.name()));
    let mut attrs: Vec<String> = node
        .attributes()
        .map(|a| format!(" {{{}}}{}={:?}", a.namespace().unwrap_or(""), a.name(), a.value()))
        .collect();
    attrs.sort();
    out.push_str(&attrs.concat());
    out.push('>');
    for c in node.children() {
        canonical(c, out);
    }
    out.push_str("</>");
}

/// Each body run as namespace-resolved XML, keyed by (paragraph, run).
pub fn canonical_runs(docx: &[u8]) -> BTreeMap<(usize, usize), String> {
    let (_, xml) = zip_entries(docx)
        .into_iter()
        .find(|(n, _)| n == "word/document.xml")
        .unwrap();
    let xml = String::from_utf8(xml).unwrap();
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let body = doc
        .root_element()
        .children()
        .find(|n| n.has_tag_name("body") || n.tag_name().name() == "body")
        .unwrap();
    let mut out = BTreeMap::new();
    for (p, para) in body.children().filter(|n| n.tag_name().name() == "p").enumerate() {
        let runs = para.children().flat_map(|c| match c.tag_name().name() {
            "r" => vec![c],
            "hyperlink" => c.children().filter(|r| r.tag_name().name() == "r").collect(),
            _ => vec![],
        });
        for (r, run) in runs.enumerate() {
            let mut s = String::new();
            canonical(run, &mut s);
            out.insert((p, r), s);
        }
    }
    out
}

/// The hand-labeled variable path table: path, valid, expected kinds.
pub fn variable_table() -> Vec<(String, bool, Vec<formdraft::llm::ViolationKind>)> {
    let text = fs::read_to_string(fixture_dir().parent().unwrap().join("variable_paths.tsv")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            let kinds = cols
                .get(2)
                .unwrap_or(&"")
                .split(',')
                .filter(|k| !k.is_empty())
                .map(|k| serde_json::from_value(serde_json::Value::String(k.to_string())).unwrap())
                .collect();
            (cols[0].to_string(), cols[1] == "yes", kinds)
        })
        .collect()
}

pub mod specs {
    use std::collections::{BTreeMap, BTreeSet};

    use formdraft::interview::{InterviewSpec, SKELETON_AFTER, SKELETON_BEFORE, Screen, TemplateKind, TemplateRef};
    use formdraft::llm::{Datatype, DocMetadata, QuestionSpec};
    use proptest::prelude::*;

    fn prose() -> impl Strategy<Value = String> {
        prop_oneof![
            "[A-Za-z ?,.]{1,40}",
            "[ -~]{0,40}",
            "\\PC{0,30}",
            Just("Line one\nline two".to_string()),
            Just("key: value # not a comment".to_string()),
            Just("- looks like a list".to_string()),
            Just("'quoted' \"twice\" ${ not_an_expression }".to_string()),
            Just("yes".to_string()),
            Just("0123".to_string()),
            Just("  padded  ".to_string()),
            Just("---".to_string()),
        ]
    }

    fn variable() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,8}(\\[[0-9]\\])?(\\.[a-z][a-z0-9_]{0,6}){0,2}"
    }

    fn datatype() -> impl Strategy<Value = Datatype> {
        prop::sample::select(Datatype::ALL.to_vec())
    }

    type RawScreen = (String, String, Vec<(String, String, Datatype, Option<String>)>);

    fn screen() -> impl Strategy<Value = RawScreen> {
        (
            "[a-z][a-z0-9_]{0,10}",
            prose(),
            prop::collection::vec((variable(), prose(), datatype(), prop::option::of(prose())), 0..5),
        )
    }

    /// Random specs that satisfy the interview's structural rules.
    pub fn interview_spec() -> impl Strategy<Value = InterviewSpec> {
        (
            prose(),
            prose(),
            prop::collection::vec(screen(), 0..6),
            any::<bool>(),
            "[a-z0-9_ ]{1,12}\\.(pdf|docx)",
            prop::collection::vec(prose(), 0..4),
        )
            .prop_map(|(title, description, raw, pdf, path, extra_fields)| {
                let mut ids = BTreeSet::new();
                let mut vars = BTreeSet::new();
                let mut screens = Vec::new();
                for (id, screen_title, qs) in raw {
                    if SKELETON_BEFORE.contains(&id.as_str())
                        || SKELETON_AFTER.contains(&id.as_str())
                        || !ids.insert(id.clone())
                    {
                        continue;
                    }
                    let mut questions = Vec::new();
                    for (v, prompt, datatype, help) in qs {
                        if !vars.insert(v.clone()) {
                            continue;
                        }
                        questions.push(QuestionSpec {
                            variable: v,
                            prompt,
                            datatype,
                            screen_id: id.clone(),
                            screen_title: screen_title.clone(),
                            help,
                        });
                    }
                    screens.push(Screen {
                        screen_id: id,
                        title: screen_title,
                        questions,
                    });
                }
                let mut field_map = BTreeMap::new();
                if pdf {
                    for (i, v) in vars.iter().enumerate() {
                        field_map.insert(format!("field {i}"), v.clone());
                    }
                    for (i, name) in extra_fields.into_iter().enumerate() {
                        if let Some(v) = vars.iter().nth(i) {
                            field_map.insert(name, v.clone());
                        }
                    }
                }
                InterviewSpec {
                    metadata: DocMetadata { title, description },
                    screens,
                    template: TemplateRef {
                        kind: if pdf { TemplateKind::Pdf } else { TemplateKind::Docx },
                        path,
                    },
                    field_map,
                }
            })
    }
}

pub mod docgen {
    use formdraft::docx::{RunEdit, extract_runs};
    use formdraft::fixtures::docx::DocxBuilder;
    use proptest::prelude::*;

    const PROPS: [&str; 4] = [
        "",
        "<w:b/>",
        "<w:i/><w:sz w:val=\"28\"/>",
        "<w:rFonts w:ascii=\"Courier\"/><w:u w:val=\"single\"/>",
    ];

    fn run_text() -> impl Strategy<Value = String> {
        prop_oneof![
            "[A-Za-z ,.:]{0,12}",
            "[ -~]{0,16}",
            "\\PC{0,8}",
            Just("[NAME]".to_string()),
            Just(" leading and trailing ".to_string()),
        ]
    }

    fn document() -> impl Strategy<Value = Vec<Vec<(String, usize)>>> {
        prop::collection::vec(prop::collection::vec((run_text(), 0..PROPS.len()), 0..5), 1..6)
    }

    fn build(paragraphs: &[Vec<(String, usize)>]) -> Vec<u8> {
        paragraphs
            .iter()
            .fold(DocxBuilder::new(), |b, runs| {
                let runs: Vec<(&str, &str)> = runs.iter().map(|(t, p)| (t.as_str(), PROPS[*p])).collect();
                b.paragraph(&runs)
            })
            .build()
    }

    fn replacement() -> impl Strategy<Value = String> {
        prop_oneof![
            "[ -~]{0,24}",
            "\\PC{0,12}",
            "[a-z_]{1,10}".prop_map(|v| format!("Dear {{{{ {v} }}}}:")),
            Just(String::new()),
            Just("a\tb\nc".to_string()),
            Just("<&>\"'".to_string()),
        ]
    }

    /// A random document and up to six edits, each to a different run.
    pub fn document_and_edits() -> impl Strategy<Value = (Vec<u8>, Vec<RunEdit>)> {
        (
            document(),
            prop::collection::vec((any::<prop::sample::Index>(), replacement()), 0..6),
        )
            .prop_map(|(paragraphs, picks)| {
                let bytes = build(&paragraphs);
                let table = extract_runs(&bytes).unwrap();
                let mut edits: Vec<RunEdit> = Vec::new();
                if !table.runs.is_empty() {
                    for (ix, text) in picks {
                        let run = ix.get(&table.runs);
                        edits.retain(|e| e.key() != run.key());
                        edits.push(RunEdit::new(run.paragraph_index, run.run_index, text));
                    }
                }
                (bytes, edits)
            })
    }
}

/// Values for every field of the 14-field form.
pub fn answer_set() -> impl Strategy<Value = BTreeMap<String, FieldValue>> {
    let text = prop::collection::vec(
        prop_oneof![
            "[ -~]{0,30}",
            "\\PC{0,20}",
            Just("02108".to_string()),
            Just("555-5555".to_string())
        ],
        FORM14_TEXT.len(),
    );
    let boxes = prop::collection::vec(any::<bool>(), FORM14_BOXES.len());
    (text, boxes).prop_map(|(text, boxes)| {
        let mut out = BTreeMap::new();
        for (f, t) in FORM14_TEXT.iter().zip(text) {
            out.insert(f.1.to_string(), FieldValue::Text(t));
        }
        for (b, v) in FORM14_BOXES.iter().zip(boxes) {
            out.insert(b.1.to_string(), FieldValue::Bool(v));
        }
        out
    })
}
