use std::fs;

use criterion::{BatchSize, Criterion, criterion_group, criterion_main};
use formdraft::docx::{RunEdit, apply_run_edits, extract_runs};
use formdraft::fixtures::docx::corpus;
use formdraft::fixtures::pdf::form14;
use formdraft::interview::{emit_yaml, parse_yaml};
use formdraft::pdf::{SizePolicy, enumerate_fields, fill_fields, stamp_placeholders};
use formdraft::pipeline::{Config, Pipeline, TRANSCRIPT_FILE, preview};
use formdraft_bench::{form14_answers, form14_fixture};

fn docx(c: &mut Criterion) {
    let (_, doc) = corpus()
        .into_iter()
        .max_by_key(|(_, b)| b.len())
        .expect("corpus is not empty");
    let table = extract_runs(&doc).unwrap();
    let edits: Vec<RunEdit> = table
        .runs
        .iter()
        .step_by(3)
        .map(|r| RunEdit::new(r.paragraph_index, r.run_index, "{{ users[0].name.full }}"))
        .collect();
    c.bench_function("docx/extract_runs", |b| b.iter(|| extract_runs(&doc).unwrap()));
    c.bench_function("docx/apply_run_edits", |b| {
        b.iter(|| apply_run_edits(&doc, &edits).unwrap())
    });
}

fn pdf(c: &mut Criterion) {
    let pdf = form14();
    let fields = enumerate_fields(&pdf).unwrap().fields;
    let answers = form14_answers();
    let policy = SizePolicy::default();
    c.bench_function("pdf/enumerate_fields", |b| b.iter(|| enumerate_fields(&pdf).unwrap()));
    c.bench_function("pdf/stamp_placeholders", |b| {
        b.iter(|| stamp_placeholders(&pdf, &fields, &policy).unwrap())
    });
    c.bench_function("pdf/fill_fields", |b| b.iter(|| fill_fields(&pdf, &answers).unwrap()));
}

fn replayed(dir: &std::path::Path, gated: bool) -> Pipeline {
    let fx = form14_fixture();
    fs::create_dir_all(dir).unwrap();
    fs::copy(fx.join(TRANSCRIPT_FILE), dir.join(TRANSCRIPT_FILE)).unwrap();
    let config = Config {
        gated,
        ..Config::offline(&fx)
    };
    Pipeline::create(dir, &fx.join("form14.pdf"), config).unwrap()
}

fn interview(c: &mut Criterion) {
    let tmp = tempfile::tempdir().unwrap();
    let mut p = replayed(&tmp.path().join("run"), false);
    p.run(None).unwrap();
    let spec = preview(p.state()).unwrap().expect("assembled").spec;
    let yaml = emit_yaml(&spec);
    c.bench_function("interview/emit_yaml", |b| b.iter(|| emit_yaml(&spec)));
    c.bench_function("interview/parse_yaml", |b| b.iter(|| parse_yaml(&yaml).unwrap()));
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("replay_to_first_gate", |b| {
        b.iter_batched(
            || tempfile::tempdir().unwrap(),
            |tmp| {
                let mut p = replayed(&tmp.path().join("run"), true);
                p.run(None).unwrap();
            },
            BatchSize::PerIteration,
        )
    });
    g.finish();
}

criterion_group!(benches, docx, pdf, interview, pipeline);
criterion_main!(benches);
