use formdraft::docx::{apply_run_edits, extract_runs, extract_template_variables};
use formdraft::fixtures::docx::{DocxBuilder, demand_letter};
use formdraft::fixtures::model::ScriptedModel;
use formdraft::llm::{Limits, LlmClient, LlmError, Mode, NamingConventions, Prompts, Stages, Transcript};

struct Rig {
    model: ScriptedModel,
    client: LlmClient,
    prompts: Prompts,
    conv: NamingConventions,
}

impl Rig {
    fn new() -> Self {
        let model = ScriptedModel::new();
        let client = LlmClient::new(Mode::Record, "scripted", Some(model.boxed()), Transcript::in_memory());
        Self {
            model,
            client,
            prompts: Prompts::default(),
            conv: NamingConventions::default(),
        }
    }

    fn stages(&self, limits: Limits) -> Stages<'_> {
        Stages {
            client: &self.client,
            prompts: &self.prompts,
            conv: &self.conv,
            limits,
        }
    }
}

#[test]
fn demand_letter_gets_placeholders() {
    let rig = Rig::new();
    let docx = demand_letter();
    let table = extract_runs(&docx).unwrap();
    let out = rig.stages(Limits::default()).label_docx_runs(&table).unwrap();
    assert!(out.quarantined.is_empty(), "{:?}", out.quarantined);
    let labeled = apply_run_edits(&docx, &out.edits).unwrap();
    let vars = extract_template_variables(&labeled.bytes).unwrap();
    assert!(vars.contains(&"other_parties[0].name.full".to_string()), "{vars:?}");
    assert!(vars.contains(&"users[0].address.street".to_string()), "{vars:?}");
    let after = extract_runs(&labeled.bytes).unwrap();
    assert_eq!(after.runs.len(), table.runs.len());
}

#[test]
fn one_bad_reply_is_repaired() {
    let rig = Rig::new();
    rig.model.queue("Sure! Here are the edits you asked for.");
    let table = extract_runs(&demand_letter()).unwrap();
    let out = rig.stages(Limits::default()).label_docx_runs(&table).unwrap();
    assert!(!out.edits.is_empty());
    assert_eq!(rig.model.tasks(), ["label_docx", "label_docx"]);
    let second = &rig.client.transcript().records()[1].request;
    assert!(second.messages.iter().any(|m| m.role == "assistant"));
}

#[test]
fn two_bad_replies_are_a_schema_violation() {
    let rig = Rig::new();
    rig.model.queue("{\"edits\": \"none\"}");
    rig.model.queue("[]");
    let table = extract_runs(&demand_letter()).unwrap();
    match rig.stages(Limits::default()).label_docx_runs(&table) {
        Err(LlmError::SchemaViolation { stage, detail }) => {
            assert_eq!(stage, "label_docx");
            assert!(!detail.is_empty());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn edits_outside_the_chunk_trigger_a_repair() {
    let rig = Rig::new();
    rig.model.queue(r#"{"edits": [[40, 0, "{{ x }}"]]}"#);
    let table = extract_runs(&demand_letter()).unwrap();
    rig.stages(Limits::default()).label_docx_runs(&table).unwrap();
    let repair = &rig.client.transcript().records()[1].request.messages;
    assert!(
        repair.last().unwrap().content.contains("[40, 0"),
        "{}",
        repair.last().unwrap().content
    );
}

#[test]
fn bad_names_and_plain_text_are_quarantined() {
    let rig = Rig::new();
    rig.model.queue(
        r#"{"edits": [[1, 1, "{{ Client Name }}:"], [5, 0, "Your signature"], [0, 0, "{{ letter_date"], [2, 3, "{{ users[0].address.street }}"]]}"#,
    );
    let table = extract_runs(&demand_letter()).unwrap();
    let out = rig.stages(Limits::default()).label_docx_runs(&table).unwrap();
    assert_eq!(out.edits.len(), 1);
    assert_eq!(out.quarantined.len(), 3);
    assert!(out.quarantined.iter().all(|q| !q.reasons.is_empty()));
}

#[test]
fn long_documents_are_chunked_with_overlap() {
    let rig = Rig::new();
    let mut b = DocxBuilder::new();
    for i in 0..30 {
        b = b.paragraph(&[("Tenant ", ""), (&format!("[NAME] paid rent in month {i}."), "")]);
    }
    let docx = b.build();
    let table = extract_runs(&docx).unwrap();
    let limits = Limits {
        docx_chunk_tokens: 60,
        ..Limits::default()
    };
    let out = rig.stages(limits).label_docx_runs(&table).unwrap();
    assert!(out.chunks > 3, "{}", out.chunks);
    assert_eq!(out.edits.len(), 30);
}

#[test]
fn oversize_requests_are_refused_before_sending() {
    let rig = Rig::new();
    let table = extract_runs(&demand_letter()).unwrap();
    let tiny = Limits {
        request_tokens: 50,
        docx_chunk_tokens: 3000,
    };
    assert!(matches!(
        rig.stages(tiny).label_docx_runs(&table),
        Err(LlmError::BudgetExceeded { .. })
    ));
    let tiny_chunks = Limits {
        docx_chunk_tokens: 5,
        ..Limits::default()
    };
    assert!(matches!(
        rig.stages(tiny_chunks).label_docx_runs(&table),
        Err(LlmError::BudgetExceeded { .. })
    ));
    assert_eq!(rig.model.calls(), 0);
}
