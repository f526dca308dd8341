use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use formdraft::docx::{apply_run_edits, extract_runs};
use formdraft::fsutil::write_atomic;
use formdraft::interview::{AnswerSet, BUNDLE_INTERVIEW, InterviewError, parse_yaml, run_fill};
use formdraft::llm::{Stages, Transcript};
use formdraft::pdf::{enumerate_fields_with, stamp_placeholders};
use formdraft::pipeline::{
    BUNDLE_FILE, Config, EditRequest, PatchOp, Pipeline, PipelineError, Progress, Stage, TRANSCRIPT_FILE,
    compute_metrics, read_state, unidentified_fields,
};
use serde::Deserialize;

use crate::cli::{Command, ModelArgs};
use crate::error::{CliError, CliResult};

/// Saved next to state.json so later commands run with the same settings.
pub const RUN_CONFIG: &str = "config.toml";

pub fn dispatch(command: Command) -> CliResult {
    match command {
        Command::LabelDocx {
            input,
            output,
            transcript,
            model,
        } => label_docx(&input, &output, transcript, &model),
        Command::AnalyzePdf {
            input,
            checkpoint,
            no_gate,
            transcript,
            stop_after,
            model,
        } => analyze_pdf(&input, &checkpoint, no_gate, transcript.as_deref(), stop_after, &model),
        Command::Resume {
            checkpoint,
            force_from,
            stop_after,
            model,
        } => resume(&checkpoint, force_from, stop_after, &model),
        Command::Edit {
            checkpoint,
            stage,
            patch,
            model,
        } => edit(&checkpoint, stage, &patch, &model),
        Command::Approve {
            checkpoint,
            stage,
            model,
        } => approve(&checkpoint, stage, &model),
        Command::Build {
            checkpoint,
            output,
            model,
        } => build(&checkpoint, &output, &model),
        Command::Fill {
            spec,
            answers,
            output,
            template,
        } => fill(&spec, &answers, &output, template.as_deref()),
        Command::Report { checkpoints, json } => report(&checkpoints, json),
        Command::Review {
            checkpoint,
            port,
            bind,
            token,
            assets,
            model,
        } => {
            let token = token.or_else(|| std::env::var(crate::ENV_REVIEW_TOKEN).ok().filter(|t| !t.is_empty()));
            let opts = crate::server::ServerOptions {
                root: checkpoint,
                model,
                token,
                assets,
            };
            crate::server::serve(opts, (bind, port))
        }
        Command::Stamp { input, output } => stamp(&input, &output),
    }
}

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// The config file, else the checkpoint's saved config, else defaults; then
/// the environment; then --mode.
pub fn load_config(model: &ModelArgs, checkpoint: Option<&Path>) -> CliResult<Config> {
    let saved = checkpoint.map(|d| d.join(RUN_CONFIG)).filter(|p| p.exists());
    let mut config = match model.config.as_deref().or(saved.as_deref()) {
        Some(p) => {
            if !p.exists() {
                return Err(CliError::Usage(format!("{}: no such config file", p.display())));
            }
            Config::load(p)?
        }
        None => Config::default(),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    if let Some(m) = model.mode {
        config.mode = m;
    }
    Ok(config)
}

fn save_config(dir: &Path, config: &Config) -> CliResult {
    write_atomic(&dir.join(RUN_CONFIG), config.to_toml().as_bytes())?;
    Ok(())
}

/// Aborts the process after the stage named in FORMDRAFT_ABORT_AFTER, to
/// exercise crash recovery.
fn install_abort_hook(p: &mut Pipeline) {
    let Some(target) = std::env::var(crate::ENV_ABORT_AFTER).ok().filter(|s| !s.is_empty()) else {
        return;
    };
    p.on_stage(move |s| {
        if s.as_str() == target {
            eprintln!("aborting after {s} ({} is set)", crate::ENV_ABORT_AFTER);
            std::process::abort();
        }
    });
}

fn open(dir: &Path, model: &ModelArgs) -> CliResult<Pipeline> {
    let config = load_config(model, Some(dir))?;
    let mut p = Pipeline::open(dir, config).map_err(|e| match e {
        PipelineError::NoCheckpoint(d) => CliError::Usage(format!("no checkpoint at {}", d.display())),
        other => other.into(),
    })?;
    install_abort_hook(&mut p);
    Ok(p)
}

fn label_docx(input: &Path, output: &Path, transcript: Option<PathBuf>, model: &ModelArgs) -> CliResult {
    let bytes = read_input(input)?;
    let config = load_config(model, None)?;
    let transcript = transcript.unwrap_or_else(|| {
        let mut name = output.as_os_str().to_owned();
        name.push(".transcript.jsonl");
        PathBuf::from(name)
    });
    let client = config.client(Transcript::open(&transcript)?)?;
    let prompts = config.prompts()?;
    let conv = config.conventions()?;
    let stages = Stages {
        client: &client,
        prompts: &prompts,
        conv: &conv,
        limits: config.limits,
    };
    let table = extract_runs(&bytes)?;
    let outcome = stages.label_docx_runs(&table)?;
    let edited = apply_run_edits(&bytes, &outcome.edits)?;
    write_atomic(output, &edited.bytes)?;
    for w in outcome.warnings.iter().chain(&edited.warnings) {
        eprintln!("warning: {w}");
    }
    for q in &outcome.quarantined {
        eprintln!(
            "held back run ({}, {}) {:?}: {}",
            q.edit.paragraph_index,
            q.edit.run_index,
            q.edit.new_text,
            q.reasons.join("; ")
        );
    }
    println!(
        "{}: {} run(s) labeled, {} held back, {} chunk(s)",
        output.display(),
        outcome.edits.len(),
        outcome.quarantined.len(),
        outcome.chunks
    );
    Ok(())
}

fn analyze_pdf(
    input: &Path,
    dir: &Path,
    no_gate: bool,
    transcript: Option<&Path>,
    stop_after: Option<Stage>,
    model: &ModelArgs,
) -> CliResult {
    if !input.exists() {
        return Err(CliError::Usage(format!("{}: no such file", input.display())));
    }
    let mut config = load_config(model, Some(dir))?;
    if no_gate {
        config.gated = false;
    }
    fs::create_dir_all(dir)?;
    if let Some(seed) = transcript {
        let target = dir.join(TRANSCRIPT_FILE);
        if !target.exists() {
            fs::copy(seed, &target).map_err(|e| CliError::Usage(format!("{}: {e}", seed.display())))?;
        }
    }
    if !dir.join(RUN_CONFIG).exists() {
        save_config(dir, &config)?;
    }
    let mut p = Pipeline::create(dir, input, config)?;
    install_abort_hook(&mut p);
    let progress = p.run(stop_after)?;
    summarize(&p, progress);
    Ok(())
}

fn resume(dir: &Path, force_from: Option<Stage>, stop_after: Option<Stage>, model: &ModelArgs) -> CliResult {
    let mut p = open(dir, model)?;
    if let Some(s) = force_from {
        p.run_stage(s, true)?;
    }
    let progress = p.run(stop_after)?;
    summarize(&p, progress);
    Ok(())
}

#[derive(Deserialize)]
struct PatchFile {
    patch: Vec<PatchOp>,
    base_version: Option<String>,
}

fn edit(dir: &Path, stage: Stage, patch: &Path, model: &ModelArgs) -> CliResult {
    let text = fs::read_to_string(patch).map_err(|e| CliError::Usage(format!("{}: {e}", patch.display())))?;
    let file: PatchFile =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", patch.display())))?;
    let mut p = open(dir, model)?;
    let req = EditRequest {
        patch: file.patch,
        base_version: file.base_version.unwrap_or_else(|| p.version().to_string()),
    };
    let out = p.edit(stage, &req)?;
    for w in &out.warnings {
        eprintln!("warning: {} {}", w.pointer, w.message);
    }
    println!("{}: edited {stage}, version {}", p.state().run_id, out.version);
    Ok(())
}

fn approve(dir: &Path, stage: Stage, model: &ModelArgs) -> CliResult {
    let mut p = open(dir, model)?;
    p.approve(stage)?;
    let progress = p.run(None)?;
    summarize(&p, progress);
    Ok(())
}

fn build(dir: &Path, output: &Path, model: &ModelArgs) -> CliResult {
    let mut p = open(dir, model)?;
    match p.run(None)? {
        Progress::Done => {}
        Progress::AwaitingReview(s) | Progress::Stopped(s) => {
            return Err(CliError::Domain(format!(
                "{} is waiting at {s}; review and approve it before building",
                p.state().run_id
            )));
        }
    }
    let bytes = fs::read(p.dir().join(BUNDLE_FILE))?;
    write_atomic(output, &bytes)?;
    println!(
        "{}: wrote {} ({} bytes)",
        p.state().run_id,
        output.display(),
        bytes.len()
    );
    Ok(())
}

fn summarize(p: &Pipeline, progress: Progress) {
    let s = p.state();
    match progress {
        Progress::AwaitingReview(stage) => {
            println!("{}: waiting for review at {stage}", s.run_id);
            let v = p.violations(stage);
            let errors = v.iter().filter(|x| x.is_error()).count();
            for x in &v {
                let kind = if x.is_error() { "error" } else { "warning" };
                println!("  {kind} {} {}", x.pointer, x.message);
            }
            if errors == 0 {
                println!(
                    "  approve with: formdraft approve --checkpoint {} --stage {stage}",
                    p.dir().display()
                );
            }
        }
        Progress::Stopped(stage) => println!("{}: stopped after {stage}", s.run_id),
        Progress::Done => println!(
            "{}: assembled; bundle at {}",
            s.run_id,
            p.dir().join(BUNDLE_FILE).display()
        ),
    }
    if let Some(b) = &s.payloads.bindings {
        let c = b.metrics;
        println!(
            "  fields {} placed {} paired {} unidentified {}",
            c.total_fields, c.placed_inline, c.paired_checkboxes, c.unidentified
        );
        for u in unidentified_fields(&b.bindings) {
            println!("  unidentified: {} ({})", u.field, u.variable);
        }
    }
}

fn read_answers(path: &Path) -> CliResult<AnswerSet> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let yaml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("yaml") || e.eq_ignore_ascii_case("yml"));
    let parsed = if yaml {
        serde_yaml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn bundle_entry(archive: &mut zip::ZipArchive<std::io::Cursor<Vec<u8>>>, name: &str) -> CliResult<Vec<u8>> {
    let mut f = archive
        .by_name(name)
        .map_err(|e| CliError::Domain(format!("bundle has no {name}: {e}")))?;
    let mut out = Vec::new();
    f.read_to_end(&mut out)?;
    Ok(out)
}

fn fill(spec: &Path, answers: &Path, output: &Path, template: Option<&Path>) -> CliResult {
    let bytes = read_input(spec)?;
    let answers = read_answers(answers)?;
    let is_zip = bytes.starts_with(b"PK\x03\x04");
    let (yaml, bundled) = if is_zip {
        let mut archive = zip::ZipArchive::new(std::io::Cursor::new(bytes))
            .map_err(|e| CliError::Domain(format!("{}: {e}", spec.display())))?;
        let yaml = String::from_utf8(bundle_entry(&mut archive, BUNDLE_INTERVIEW)?)
            .map_err(|_| CliError::Domain(format!("{BUNDLE_INTERVIEW} is not UTF-8")))?;
        (yaml, Some(archive))
    } else {
        let yaml =
            String::from_utf8(bytes).map_err(|_| CliError::Domain(format!("{} is not UTF-8", spec.display())))?;
        (yaml, None)
    };
    let interview = parse_yaml(&yaml)?;
    let template_bytes = match (template, bundled) {
        (Some(t), _) => read_input(t)?,
        (None, Some(mut archive)) => {
            bundle_entry(&mut archive, &format!("data/templates/{}", interview.template.path))?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "--template is required when SPEC is an interview YAML".into(),
            ));
        }
    };
    let filled = run_fill(&interview, &answers, &template_bytes).map_err(|e| match e {
        InterviewError::MissingAnswer(v) => CliError::Domain(format!("missing answers:\n  {}", v.join("\n  "))),
        InterviewError::ValidationFailure(v) => {
            let lines: Vec<String> = v.iter().map(|(var, m)| format!("  {var}: {m}")).collect();
            CliError::Domain(format!("invalid answers:\n{}", lines.join("\n")))
        }
        other => other.into(),
    })?;
    for w in &filled.warnings {
        eprintln!("warning: {w}");
    }
    write_atomic(output, &filled.bytes)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn report(dirs: &[PathBuf], json: bool) -> CliResult {
    let mut rows = Vec::new();
    for d in dirs {
        let (state, _) = read_state(d).map_err(|e| match e {
            PipelineError::NoCheckpoint(d) => CliError::Usage(format!("no checkpoint at {}", d.display())),
            other => other.into(),
        })?;
        match state.metrics_row() {
            Some(r) => rows.push(r),
            None => eprintln!("warning: {} has no bindings draft yet; skipped", state.run_id),
        }
    }
    if rows.is_empty() {
        return Err(CliError::Domain(
            "none of the runs has reached the bindings draft".into(),
        ));
    }
    let report = compute_metrics(rows);
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.render_table());
    }
    Ok(())
}

fn stamp(input: &Path, output: &Path) -> CliResult {
    let bytes = read_input(input)?;
    let policy = formdraft::pdf::SizePolicy::default();
    let list = enumerate_fields_with(&bytes, &policy)?;
    let stamped = stamp_placeholders(&bytes, &list.fields, &policy)?;
    write_atomic(output, &stamped.pdf)?;
    for d in list.diagnostics.iter().chain(&stamped.diagnostics) {
        eprintln!("note: {d}");
    }
    let map: BTreeMap<&str, &str> = stamped
        .map
        .entries
        .iter()
        .map(|e| (e.token.name(), e.field.as_str()))
        .collect();
    for (token, field) in map {
        println!("{token}\t{field}");
    }
    Ok(())
}
