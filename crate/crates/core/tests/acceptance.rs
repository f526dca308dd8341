//! One line per acceptance criterion. Runs offline against the recorded
//! form fixture.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use formdraft::docx::{apply_run_edits, extract_runs};
use formdraft::fixtures::docx::corpus;
use formdraft::fixtures::pdf::form14;
use formdraft::interview::{Answer, AnswerSet, emit_yaml, parse_yaml, run_fill};
use formdraft::llm::{BindingSource, Datatype, NamingConventions, Transcript, has_errors, validate_variable};
use formdraft::pdf::{FieldValue, fill_fields, read_field_values};
use formdraft::pipeline::{
    BUNDLE_FILE, Config, EditRequest, PatchOp, Pipeline, Progress, Stage, TRANSCRIPT_FILE, compute_metrics, read_state,
};
use proptest::test_runner::{Config as RunnerConfig, TestCaseError, TestRunner};
use serde_json::json;

const DOCX_LIMIT: Duration = Duration::from_secs(5);
const STAMP_LIMIT: Duration = Duration::from_secs(10);
const REPLAY_LIMIT: Duration = Duration::from_secs(30);
const MIN_DOCX_DOCS: usize = 5;
const MIN_TABLE_ROWS: usize = 20;
const REPLACEMENT_CASES: u32 = 256;
const FILL_CASES: u32 = 100;
const YAML_CASES: u32 = 256;
const FRACTION_TOLERANCE: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn within(started: Instant, limit: Duration) -> Result<String, String> {
    let took = started.elapsed();
    check(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(format!("{took:.2?} < {limit:?}"))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(RunnerConfig {
        cases,
        failure_persistence: None,
        ..RunnerConfig::default()
    })
}

fn docx_round_trip() -> Outcome {
    let started = Instant::now();
    let docs = corpus();
    check(docs.len() >= MIN_DOCX_DOCS, || format!("only {} documents", docs.len()))?;
    for (name, bytes) in &docs {
        let table = extract_runs(bytes).map_err(|e| e.to_string())?;
        let same = apply_run_edits(bytes, &[]).map_err(|e| e.to_string())?;
        let again = extract_runs(&same.bytes).map_err(|e| e.to_string())?;
        let shape = |t: &formdraft::docx::RunTable| (t.runs.clone(), t.paragraphs, t.skipped_table_cells);
        check(shape(&again) == shape(&table), || {
            format!("{name}: run table changed without edits")
        })?;
        let edits: Vec<_> = table
            .runs
            .iter()
            .step_by(2)
            .map(|r| formdraft::docx::RunEdit::new(r.paragraph_index, r.run_index, "{{ x }}"))
            .collect();
        let edited = apply_run_edits(bytes, &edits).map_err(|e| e.to_string())?;
        let touched: BTreeSet<_> = edits.iter().map(|e| e.key()).collect();
        let before = common::canonical_runs(bytes);
        let after = common::canonical_runs(&edited.bytes);
        for (key, xml) in &before {
            check(touched.contains(key) || after.get(key) == Some(xml), || {
                format!("{name}: untouched run {key:?} changed")
            })?;
        }
    }
    Ok(format!("{} documents, {}", docs.len(), within(started, DOCX_LIMIT)?))
}

fn full_replacement() -> Outcome {
    runner(REPLACEMENT_CASES)
        .run(&common::docgen::document_and_edits(), |(bytes, edits)| {
            let out = apply_run_edits(&bytes, &edits).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let table = extract_runs(&out.bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for e in &edits {
                let got = table.get(e.paragraph_index, e.run_index).map(|r| r.text.as_str());
                if got != Some(e.new_text.as_str()) {
                    return Err(TestCaseError::fail(format!(
                        "run {:?}: {:?} != {:?}",
                        e.key(),
                        got,
                        e.new_text
                    )));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{REPLACEMENT_CASES} random tables, every edited run equals its new text"
    ))
}

fn stamp_recover() -> Outcome {
    let started = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut p = common::replay_run(&tmp.path().join("run"));
    let progress = p.run(None).map_err(|e| e.to_string())?;
    check(progress == Progress::AwaitingReview(Stage::BindingsDraft), || {
        format!("{progress:?}")
    })?;
    let (recovered, missing) = p.state().payloads.ocr.as_ref().unwrap().context.coverage();
    check((recovered, missing) == (9, 1), || {
        format!("recovered={recovered} missing={missing}")
    })?;
    let bindings = &p.state().payloads.bindings.as_ref().unwrap().bindings;
    let boxes: Vec<_> = bindings
        .iter()
        .filter(|b| b.source == BindingSource::Checkbox)
        .collect();
    let paired = boxes.iter().filter(|b| b.paired == Some(true)).count();
    check((paired, boxes.len()) == (2, 4), || {
        format!("paired {paired} of {}", boxes.len())
    })?;
    let row = p.state().metrics_row().ok_or("no metrics")?;
    let report = compute_metrics(vec![row]);
    let c = report.field_weighted.counts;
    let f = report.field_weighted.fractions;
    check(
        c.placed_inline + c.paired_checkboxes + c.unidentified == c.total_fields,
        || format!("{c:?}"),
    )?;
    check(
        (c.placed_inline + c.paired_checkboxes, c.unidentified, c.total_fields) == (11, 3, 14),
        || format!("{c:?}"),
    )?;
    check((f.recognized - 11.0 / 14.0).abs() < FRACTION_TOLERANCE, || {
        format!("recognized {}", f.recognized)
    })?;
    check((f.unidentified - 3.0 / 14.0).abs() < FRACTION_TOLERANCE, || {
        format!("unidentified {}", f.unidentified)
    })?;
    check((f.recognized + f.unidentified - 1.0).abs() < FRACTION_TOLERANCE, || {
        "fractions do not sum to 1".into()
    })?;
    Ok(format!(
        "recovered=9 missing=1, paired 2/4, recognized 11/14, unidentified 3/14, {}",
        within(started, STAMP_LIMIT)?
    ))
}

fn complete(p: &mut Pipeline) -> Result<(), String> {
    p.run(None).map_err(|e| e.to_string())?;
    p.approve(Stage::BindingsDraft).map_err(|e| e.to_string())?;
    p.run(None).map_err(|e| e.to_string())?;
    p.approve(Stage::QuestionsDraft).map_err(|e| e.to_string())?;
    let done = p.run(None).map_err(|e| e.to_string())?;
    check(done == Progress::Done, || format!("{done:?}"))
}

fn replay_determinism() -> Outcome {
    let started = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bundles = Vec::new();
    for name in ["a", "b"] {
        let mut p = common::replay_run(&tmp.path().join(name));
        complete(&mut p)?;
        check(p.client().network_calls() == 0, || "replay reached the network".into())?;
        bundles.push(fs::read(p.dir().join(BUNDLE_FILE)).map_err(|e| e.to_string())?);
    }
    check(bundles[0] == bundles[1], || "bundle.zip differs between runs".into())?;
    Ok(format!(
        "{} bytes identical, {}",
        bundles[0].len(),
        within(started, REPLAY_LIMIT)?
    ))
}

fn convention_table() -> Outcome {
    let conv = NamingConventions::default();
    let table = common::variable_table();
    check(table.len() >= MIN_TABLE_ROWS, || format!("only {} rows", table.len()))?;
    let disagreements: Vec<String> = table
        .iter()
        .filter(|(path, valid, _)| has_errors(&validate_variable(path, &conv)) == *valid)
        .map(|(path, _, _)| format!("{path:?}"))
        .collect();
    check(disagreements.is_empty(), || {
        format!("disagreements: {}", disagreements.join(", "))
    })?;
    Ok(format!("{} paths, 0 disagreements", table.len()))
}

fn datatype_guards() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut p = common::replay_run(&tmp.path().join("run"));
    p.run(None).map_err(|e| e.to_string())?;
    let i = p
        .state()
        .payloads
        .bindings
        .as_ref()
        .unwrap()
        .bindings
        .iter()
        .position(|b| b.variable == common::FORM14_EDIT_FROM)
        .ok_or("no binding to rename")?;
    let req = EditRequest {
        patch: vec![PatchOp {
            path: format!("/bindings/{i}/variable"),
            value: json!(common::FORM14_EDIT_TO),
        }],
        base_version: p.version().to_string(),
    };
    p.edit(Stage::BindingsDraft, &req).map_err(|e| e.to_string())?;
    complete(&mut p)?;
    let spec = parse_yaml(&p.state().payloads.assembled.as_ref().unwrap().yaml).map_err(|e| e.to_string())?;
    let mut answers = AnswerSet::new();
    for q in spec.questions() {
        let a = match q.datatype {
            Datatype::Yesno => Answer::Bool(false),
            Datatype::Zip => Answer::text("02108"),
            Datatype::Phone => Answer::text("555-5555"),
            Datatype::Currency => Answer::text("10"),
            Datatype::Date => Answer::text("2024-01-31"),
            _ => Answer::text("x"),
        };
        answers.insert(q.variable.clone(), a);
    }
    let zip = spec.question("users[0].address.zip").map(|q| q.datatype);
    let phone = spec.question("users[0].phone_number").map(|q| q.datatype);
    check(zip == Some(Datatype::Zip) && phone == Some(Datatype::Phone), || {
        format!("zip {zip:?}, phone {phone:?}")
    })?;
    let filled = run_fill(&spec, &answers, &form14()).map_err(|e| e.to_string())?;
    let back = read_field_values(&filled.bytes).map_err(|e| e.to_string())?;
    for (field, want) in [("zip", "02108"), ("phone", "555-5555")] {
        check(back.get(field) == Some(&FieldValue::Text(want.into())), || {
            format!("{field}: {:?}", back.get(field))
        })?;
    }
    Ok("\"02108\" and \"555-5555\" read back verbatim".into())
}

fn fill_oracle() -> Outcome {
    let template = form14();
    runner(FILL_CASES)
        .run(&common::answer_set(), |answers| {
            let filled = fill_fields(&template, &answers).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let back = read_field_values(&filled).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if back != answers {
                return Err(TestCaseError::fail(format!("{back:?} != {answers:?}")));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{FILL_CASES} random answer sets read back exactly"))
}

fn yaml_round_trip() -> Outcome {
    runner(YAML_CASES)
        .run(&common::specs::interview_spec(), |spec| {
            let yaml = emit_yaml(&spec);
            let back = parse_yaml(&yaml).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if back != spec {
                return Err(TestCaseError::fail("parse(emit(spec)) != spec"));
            }
            yaml_rust2::YamlLoader::load_from_str(&yaml).map_err(|e| TestCaseError::fail(e.to_string()))?;
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{YAML_CASES} random specs, all parsed by a second YAML parser"))
}

fn ungated() -> Config {
    Config {
        gated: false,
        ..common::record_config()
    }
}

fn keys(dir: &std::path::Path) -> Result<Vec<String>, String> {
    Ok(Transcript::open(dir.join(TRANSCRIPT_FILE))
        .map_err(|e| e.to_string())?
        .records()
        .into_iter()
        .map(|r| r.key)
        .collect())
}

fn crash_resume() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clean = tmp.path().join("clean");
    let mut p = Pipeline::create(&clean, &common::form14_pdf(), ungated()).map_err(|e| e.to_string())?;
    p.run(None).map_err(|e| e.to_string())?;
    drop(p);
    let expected = keys(&clean)?;
    let mut kills = 0;
    for kill_after in Stage::ALL.into_iter().skip(1) {
        let dir = tmp.path().join(kill_after.as_str());
        let crashed = catch_unwind(AssertUnwindSafe(|| {
            let mut p = Pipeline::create(&dir, &common::form14_pdf(), ungated()).unwrap();
            p.on_stage(move |s| {
                if s == kill_after {
                    panic!("killed");
                }
            });
            let _ = p.run(None);
        }));
        check(crashed.is_err(), || format!("no kill after {kill_after}"))?;
        let (state, _) = read_state(&dir).map_err(|e| e.to_string())?;
        check(state.stage == kill_after, || {
            format!("checkpoint at {} after killing at {kill_after}", state.stage)
        })?;
        let mut p = Pipeline::open(&dir, ungated()).map_err(|e| e.to_string())?;
        let done = p.run(None).map_err(|e| e.to_string())?;
        check(done == Progress::Done, || format!("{done:?}"))?;
        let got = keys(&dir)?;
        let unique: BTreeSet<&String> = got.iter().collect();
        check(unique.len() == got.len(), || {
            format!("duplicate records after killing at {kill_after}")
        })?;
        check(got == expected, || {
            format!("transcript differs after killing at {kill_after}")
        })?;
        kills += 1;
    }
    Ok(format!(
        "{kills} kill points, {} records each, no duplicates",
        expected.len()
    ))
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [Criterion; 9] = [
        ("docx round-trip", docx_round_trip),
        ("full-replacement property", full_replacement),
        ("stamp/recover on the 14-field form", stamp_recover),
        ("replay determinism", replay_determinism),
        ("convention validator table", convention_table),
        ("datatype guards", datatype_guards),
        ("fill oracle", fill_oracle),
        ("yaml round-trip", yaml_round_trip),
        ("crash/resume", crash_resume),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(f).unwrap_or_else(|e| {
            let why = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(why)
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
