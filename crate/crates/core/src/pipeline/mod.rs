//! The staged run: one checkpoint directory per form, persisted after every
//! stage, with two review gates.

mod config;
mod metrics;
mod review;

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::context::{
    ContextError, OcrEngine, PlaceholderContext, Rasterizer, WordBox, join_pages, ocr_pages, page_words, reconcile,
};
use crate::digest::sha256_hex;
use crate::fsutil::write_atomic;
use crate::interview::{
    AssembleError, Assembled, DatatypeOverride, InterviewError, TemplateSource, assemble, bundle_files,
    normalize_datatypes, write_bundle,
};
use crate::llm::{
    BindingSource, DocMetadata, LlmClient, LlmError, NamingConventions, Prompts, QuestionSpec, Stages, Transcript,
    VariableBinding,
};
use crate::pdf::{FieldDescriptor, PdfError, PlaceholderMap, SizeClass, enumerate_fields_with, stamp_placeholders};

pub use config::{Adapter, Config, ENV_API_KEY, ENV_BASE_URL, ENV_MODE, ENV_MODEL, SCRIPTED_BACKEND};
pub use metrics::{Counts, Fractions, MetricsReport, MetricsRow, compute_metrics};
pub use review::{
    EditOutcome, EditRequest, PatchOp, PointerViolation, refresh_flags, validate_bindings, validate_questions,
};

pub const STATE_FILE: &str = "state.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const SOURCE_FILE: &str = "source.pdf";
pub const STAMPED_FILE: &str = "stamped.pdf";
pub const BUNDLE_FILE: &str = "bundle.zip";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingested,
    Stamped,
    OcrDone,
    MetadataBound,
    BindingsDraft,
    BindingsReviewed,
    QuestionsDraft,
    QuestionsReviewed,
    Assembled,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingested,
        Stage::Stamped,
        Stage::OcrDone,
        Stage::MetadataBound,
        Stage::BindingsDraft,
        Stage::BindingsReviewed,
        Stage::QuestionsDraft,
        Stage::QuestionsReviewed,
        Stage::Assembled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingested => "ingested",
            Stage::Stamped => "stamped",
            Stage::OcrDone => "ocr_done",
            Stage::MetadataBound => "metadata_bound",
            Stage::BindingsDraft => "bindings_draft",
            Stage::BindingsReviewed => "bindings_reviewed",
            Stage::QuestionsDraft => "questions_draft",
            Stage::QuestionsReviewed => "questions_reviewed",
            Stage::Assembled => "assembled",
        }
    }

    pub fn next(self) -> Option<Stage> {
        Stage::ALL.get(self as usize + 1).copied()
    }

    pub fn prev(self) -> Option<Stage> {
        (self as usize).checked_sub(1).map(|i| Stage::ALL[i])
    }

    /// Draft stages that wait for a reviewer.
    pub fn is_gate(self) -> bool {
        matches!(self, Stage::BindingsDraft | Stage::QuestionsDraft)
    }

    pub fn is_reviewed(self) -> bool {
        matches!(self, Stage::BindingsReviewed | Stage::QuestionsReviewed)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Stage::ALL.iter().map(|s| s.as_str()).collect();
            format!("unknown stage '{s}'; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage order: {0}")]
    StageOrder(String),
    #[error("{file}: invalid at {pointer}: {message}")]
    SchemaViolation {
        file: String,
        pointer: String,
        message: String,
    },
    #[error("the payload has {} problem(s): {}", .0.len(), .0.iter().map(|v| format!("{} {}", v.pointer, v.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<PointerViolation>),
    #[error("checkpoint changed since version {expected}; reload and reapply the edit")]
    VersionConflict { expected: String, actual: String },
    #[error("{0} is in use by another process")]
    Locked(PathBuf),
    #[error("no checkpoint at {0}")]
    NoCheckpoint(PathBuf),
    #[error("{0}")]
    Input(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Pdf(#[from] PdfError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Interview(#[from] InterviewError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestedPayload {
    pub source_file: String,
    pub source_sha256: String,
    pub fields: Vec<FieldDescriptor>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StampedPayload {
    pub stamped_sha256: String,
    pub map: PlaceholderMap,
    /// Fields after demotion of those too small for a token.
    pub fields: Vec<FieldDescriptor>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcrPayload {
    pub context: PlaceholderContext,
    pub words: Vec<WordBox>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataPayload {
    pub metadata: DocMetadata,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingsPayload {
    pub metadata: DocMetadata,
    pub bindings: Vec<VariableBinding>,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Coverage of the draft, before any review.
    pub metrics: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionsPayload {
    pub questions: Vec<QuestionSpec>,
    #[serde(default)]
    pub overrides: Vec<DatatypeOverride>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssembledPayload {
    pub yaml: String,
    pub bundle_sha256: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payloads {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingested: Option<IngestedPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stamped: Option<StampedPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr: Option<OcrPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<MetadataPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bindings: Option<BindingsPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub questions: Option<QuestionsPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembled: Option<AssembledPayload>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: String,
    pub stage: Stage,
    pub action: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    pub run_id: String,
    /// Last completed stage.
    pub stage: Stage,
    pub gated: bool,
    pub transcript: String,
    pub payloads: Payloads,
    #[serde(default)]
    pub audit: Vec<AuditEntry>,
}

impl State {
    /// The document a stage produced, as JSON. Draft and reviewed stages
    /// share one payload.
    pub fn payload(&self, stage: Stage) -> Option<Value> {
        if stage > self.stage {
            return None;
        }
        let p = &self.payloads;
        let v = match stage {
            Stage::Ingested => serde_json::to_value(p.ingested.as_ref()?),
            Stage::Stamped => serde_json::to_value(p.stamped.as_ref()?),
            Stage::OcrDone => serde_json::to_value(p.ocr.as_ref()?),
            Stage::MetadataBound => serde_json::to_value(p.metadata.as_ref()?),
            Stage::BindingsDraft | Stage::BindingsReviewed => serde_json::to_value(p.bindings.as_ref()?),
            Stage::QuestionsDraft | Stage::QuestionsReviewed => serde_json::to_value(p.questions.as_ref()?),
            Stage::Assembled => serde_json::to_value(p.assembled.as_ref()?),
        };
        Some(v.expect("payloads serialize"))
    }

    fn clear_after(&mut self, stage: Stage) {
        let p = &mut self.payloads;
        let keep = |s: Stage| s <= stage;
        if !keep(Stage::Ingested) {
            p.ingested = None;
        }
        if !keep(Stage::Stamped) {
            p.stamped = None;
        }
        if !keep(Stage::OcrDone) {
            p.ocr = None;
        }
        if !keep(Stage::MetadataBound) {
            p.metadata = None;
        }
        if !keep(Stage::BindingsDraft) {
            p.bindings = None;
        }
        if !keep(Stage::QuestionsDraft) {
            p.questions = None;
        }
        if !keep(Stage::Assembled) {
            p.assembled = None;
        }
    }

    /// Coverage row for reports; needs the bindings draft.
    pub fn metrics_row(&self) -> Option<MetricsRow> {
        self.payloads
            .bindings
            .as_ref()
            .map(|b| MetricsRow::new(self.run_id.clone(), b.metrics))
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push_str(&key.replace('~', "~0").replace('/', "~1"))
            }
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Deserializes JSON, reporting failures with a JSON pointer.
pub fn from_json<T: serde::de::DeserializeOwned>(file: &str, json: &str) -> Result<T, PipelineError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    serde_path_to_error::deserialize(de).map_err(|e| PipelineError::SchemaViolation {
        file: file.to_string(),
        pointer: pointer_of(e.path()),
        message: e.inner().to_string(),
    })
}

/// Reads a checkpoint's state without taking the lock.
pub fn read_state(dir: &Path) -> Result<(State, String), PipelineError> {
    let path = dir.join(STATE_FILE);
    let bytes = fs::read(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => PipelineError::NoCheckpoint(dir.to_path_buf()),
        _ => PipelineError::Io(e),
    })?;
    let text = String::from_utf8(bytes).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    let state = from_json(STATE_FILE, &text)?;
    Ok((state, sha256_hex(text.as_bytes())))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn lock(dir: &Path) -> Result<File, PipelineError> {
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(dir.join(LOCK_FILE))?;
    match file.try_lock() {
        Ok(()) => Ok(file),
        Err(fs::TryLockError::WouldBlock) => Err(PipelineError::Locked(dir.to_path_buf())),
        Err(fs::TryLockError::Error(e)) => Err(e.into()),
    }
}

/// Where the run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    AwaitingReview(Stage),
    Stopped(Stage),
    Done,
}

type StageHook = Box<dyn FnMut(Stage) + Send>;

pub struct Pipeline {
    dir: PathBuf,
    state: State,
    version: String,
    config: Config,
    client: LlmClient,
    prompts: Prompts,
    conv: NamingConventions,
    rasterizer: Box<dyn Rasterizer>,
    ocr: Box<dyn OcrEngine>,
    hook: Option<StageHook>,
    _lock: File,
}

impl Pipeline {
    /// Starts a run on `source`, or reopens the run in `dir` if it was
    /// started from the same file.
    pub fn create(dir: &Path, source: &Path, config: Config) -> Result<Self, PipelineError> {
        let bytes = fs::read(source).map_err(|e| PipelineError::Input(format!("{}: {e}", source.display())))?;
        let digest = sha256_hex(&bytes);
        fs::create_dir_all(dir)?;
        if dir.join(STATE_FILE).exists() {
            let p = Self::open(dir, config)?;
            let same = p.state.payloads.ingested.as_ref().map(|i| i.source_sha256.as_str()) == Some(digest.as_str());
            if !same {
                return Err(PipelineError::Input(format!(
                    "{} already holds a run for a different file",
                    dir.display()
                )));
            }
            return Ok(p);
        }
        let guard = lock(dir)?;
        let ingested = Self::ingest(&bytes, source, &config)?;
        write_atomic(&dir.join(SOURCE_FILE), &bytes)?;
        let run_id = dir
            .file_name()
            .map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned());
        let state = State {
            run_id,
            stage: Stage::Ingested,
            gated: config.gated,
            transcript: TRANSCRIPT_FILE.into(),
            payloads: Payloads {
                ingested: Some(ingested),
                ..Default::default()
            },
            audit: vec![AuditEntry {
                at: now(),
                stage: Stage::Ingested,
                action: "created".into(),
                detail: source.display().to_string(),
            }],
        };
        let mut p = Self::assemble_parts(dir, state, String::new(), config, guard)?;
        p.save()?;
        Ok(p)
    }

    pub fn open(dir: &Path, config: Config) -> Result<Self, PipelineError> {
        if !dir.join(STATE_FILE).exists() {
            return Err(PipelineError::NoCheckpoint(dir.to_path_buf()));
        }
        let guard = lock(dir)?;
        let (state, version) = read_state(dir)?;
        Self::assemble_parts(dir, state, version, config, guard)
    }

    fn assemble_parts(
        dir: &Path,
        state: State,
        version: String,
        config: Config,
        guard: File,
    ) -> Result<Self, PipelineError> {
        let transcript = Transcript::open(dir.join(&state.transcript))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            client: config.client(transcript)?,
            prompts: config.prompts()?,
            conv: config.conventions()?,
            rasterizer: config.rasterizer(),
            ocr: config.ocr_engine(),
            state,
            version,
            config,
            hook: None,
            _lock: guard,
        })
    }

    /// Called after each stage is saved.
    pub fn on_stage(&mut self, hook: impl FnMut(Stage) + Send + 'static) {
        self.hook = Some(Box::new(hook));
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// SHA-256 of state.json as last written.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn client(&self) -> &LlmClient {
        &self.client
    }

    pub fn conventions(&self) -> &NamingConventions {
        &self.conv
    }

    fn save(&mut self) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(&self.state).expect("state serializes");
        text.push('\n');
        write_atomic(&self.dir.join(STATE_FILE), text.as_bytes())?;
        self.version = sha256_hex(text.as_bytes());
        Ok(())
    }

    fn audit(&mut self, stage: Stage, action: &str, detail: impl Into<String>) {
        self.state.audit.push(AuditEntry {
            at: now(),
            stage,
            action: action.into(),
            detail: detail.into(),
        });
    }

    /// Runs stages until a gate, the end, or `stop_after`.
    pub fn run(&mut self, stop_after: Option<Stage>) -> Result<Progress, PipelineError> {
        loop {
            let current = self.state.stage;
            if Some(current) == stop_after && current != Stage::Assembled {
                return Ok(Progress::Stopped(current));
            }
            let Some(next) = current.next() else {
                return Ok(Progress::Done);
            };
            if current.is_gate() {
                if self.state.gated {
                    return Ok(Progress::AwaitingReview(current));
                }
                self.promote(current, "auto-approved", "review gates are disabled")?;
                continue;
            }
            self.execute(next)?;
        }
    }

    /// Runs one stage. A completed stage is left alone unless `force`, which
    /// discards it and everything after it first.
    pub fn run_stage(&mut self, stage: Stage, force: bool) -> Result<bool, PipelineError> {
        if stage.is_reviewed() {
            return Err(PipelineError::StageOrder(format!(
                "{stage} is reached by approving {}",
                stage.prev().expect("reviewed stages follow drafts")
            )));
        }
        let current = self.state.stage;
        if stage <= current {
            if !force {
                return Ok(false);
            }
            match stage.prev() {
                Some(prev) => {
                    self.state.clear_after(prev);
                    self.state.stage = prev;
                }
                None => self.state.clear_after(Stage::Ingested),
            }
            self.audit(stage, "forced", "re-running this stage and discarding later ones");
            if stage == Stage::Ingested {
                let bytes = fs::read(self.dir.join(SOURCE_FILE))?;
                let name = self
                    .state
                    .payloads
                    .ingested
                    .as_ref()
                    .map_or_else(|| SOURCE_FILE.to_string(), |i| i.source_file.clone());
                let ingested = Self::ingest(&bytes, Path::new(&name), &self.config)?;
                self.state.clear_after(Stage::Ingested);
                self.state.payloads.ingested = Some(ingested);
                self.state.stage = Stage::Ingested;
                self.save()?;
                return Ok(true);
            }
        } else if Some(stage) != current.next() {
            return Err(PipelineError::StageOrder(format!(
                "{stage} cannot run before {}",
                current.next().expect("not at the end")
            )));
        } else if current.is_gate() {
            return Err(PipelineError::StageOrder(format!("{current} must be approved first")));
        }
        self.execute(stage)?;
        Ok(true)
    }

    /// Approves a draft at its gate after validating it.
    pub fn approve(&mut self, stage: Stage) -> Result<(), PipelineError> {
        if !stage.is_gate() {
            return Err(PipelineError::StageOrder(format!(
                "{stage} is not a review gate; gates are bindings_draft and questions_draft"
            )));
        }
        if self.state.stage != stage {
            return Err(PipelineError::StageOrder(format!(
                "the run is at {}, not {stage}",
                self.state.stage
            )));
        }
        self.promote(stage, "approved", "")
    }

    fn promote(&mut self, stage: Stage, action: &str, detail: &str) -> Result<(), PipelineError> {
        let errors: Vec<PointerViolation> = self.violations(stage).into_iter().filter(|v| v.is_error()).collect();
        if !errors.is_empty() {
            return Err(PipelineError::Invalid(errors));
        }
        let next = stage.next().expect("gates have a successor");
        self.state.stage = next;
        self.audit(next, action, detail);
        self.save()?;
        log::info!("{}: {stage} {action}", self.state.run_id);
        if let Some(h) = &mut self.hook {
            h(next);
        }
        Ok(())
    }

    /// Problems with the gate payload at `stage`, errors first.
    pub fn violations(&self, stage: Stage) -> Vec<PointerViolation> {
        stage_violations(&self.state, &self.conv, stage)
    }

    fn need<T>(payload: &Option<T>, stage: Stage) -> Result<&T, PipelineError> {
        payload.as_ref().ok_or_else(|| PipelineError::SchemaViolation {
            file: STATE_FILE.into(),
            pointer: "/payloads".into(),
            message: format!("the {stage} payload is missing"),
        })
    }

    fn ingest(bytes: &[u8], source: &Path, config: &Config) -> Result<IngestedPayload, PipelineError> {
        let list = enumerate_fields_with(bytes, &config.size_policy)?;
        Ok(IngestedPayload {
            source_file: source
                .file_name()
                .map_or_else(|| SOURCE_FILE.to_string(), |n| n.to_string_lossy().into_owned()),
            source_sha256: sha256_hex(bytes),
            fields: list.fields,
            diagnostics: list.diagnostics,
        })
    }

    fn stages(&self) -> Stages<'_> {
        Stages {
            client: &self.client,
            prompts: &self.prompts,
            conv: &self.conv,
            limits: self.config.limits,
        }
    }

    fn execute(&mut self, stage: Stage) -> Result<(), PipelineError> {
        log::info!("{}: running {stage}", self.state.run_id);
        match stage {
            Stage::Ingested => unreachable!("ingestion happens at creation"),
            Stage::Stamped => {
                let ingested = Self::need(&self.state.payloads.ingested, Stage::Ingested)?;
                let source = fs::read(self.dir.join(SOURCE_FILE))?;
                let stamped = stamp_placeholders(&source, &ingested.fields, &self.config.size_policy)?;
                write_atomic(&self.dir.join(STAMPED_FILE), &stamped.pdf)?;
                self.state.payloads.stamped = Some(StampedPayload {
                    stamped_sha256: sha256_hex(&stamped.pdf),
                    map: stamped.map,
                    fields: stamped.fields,
                    diagnostics: stamped.diagnostics,
                });
            }
            Stage::OcrDone => {
                let stamped = Self::need(&self.state.payloads.stamped, Stage::Stamped)?;
                let pdf = fs::read(self.dir.join(STAMPED_FILE))?;
                let pages_dir = self.dir.join("pages");
                let images = self.rasterizer.rasterize(&pdf, self.config.dpi, &pages_dir)?;
                let pages = ocr_pages(&images, self.ocr.as_ref())?;
                let ocr_dir = self.dir.join("ocr");
                fs::create_dir_all(&ocr_dir)?;
                let mut diagnostics = Vec::new();
                let mut words = Vec::new();
                for p in &pages {
                    write_atomic(&ocr_dir.join(format!("page-{:04}.txt", p.page + 1)), p.text.as_bytes())?;
                    diagnostics.extend(p.diagnostics.iter().cloned());
                    words.extend(page_words(p));
                }
                let context = reconcile(&join_pages(&pages), &stamped.map);
                self.state.payloads.ocr = Some(OcrPayload {
                    context,
                    words,
                    diagnostics,
                });
            }
            Stage::MetadataBound => {
                let ocr = Self::need(&self.state.payloads.ocr, Stage::OcrDone)?;
                let (metadata, warnings) = self.stages().generate_doc_metadata(&ocr.context)?;
                self.state.payloads.metadata = Some(MetadataPayload { metadata, warnings });
            }
            Stage::BindingsDraft => {
                let stamped = Self::need(&self.state.payloads.stamped, Stage::Stamped)?;
                let ocr = Self::need(&self.state.payloads.ocr, Stage::OcrDone)?;
                let meta = Self::need(&self.state.payloads.metadata, Stage::MetadataBound)?;
                let stages = self.stages();
                let mut bindings = stages.rename_placeholders(&ocr.context, &stamped.map, &stamped.fields)?;
                let small: Vec<FieldDescriptor> = stamped
                    .fields
                    .iter()
                    .filter(|f| f.size_class == SizeClass::Small)
                    .cloned()
                    .collect();
                bindings.extend(stages.pair_checkboxes(&small, &ocr.words, &self.config.pairing)?);
                stages.write_definitions(&mut bindings, &ocr.context)?;
                let metrics = Counts::from_draft(&ocr.context, &bindings);
                self.state.payloads.bindings = Some(BindingsPayload {
                    metadata: meta.metadata.clone(),
                    bindings,
                    warnings: meta.warnings.clone(),
                    metrics,
                });
            }
            Stage::QuestionsDraft => {
                let b = Self::need(&self.state.payloads.bindings, Stage::BindingsReviewed)?;
                let (mut questions, mut warnings) = self.stages().draft_questions(&b.bindings)?;
                let defs = b
                    .bindings
                    .iter()
                    .map(|x| (x.variable.clone(), x.definition.clone()))
                    .collect();
                let overrides = normalize_datatypes(&mut questions, &defs);
                warnings.extend(
                    overrides
                        .iter()
                        .map(|o| format!("{}: datatype {} changed to {} ({})", o.variable, o.from, o.to, o.reason)),
                );
                self.state.payloads.questions = Some(QuestionsPayload {
                    questions,
                    overrides,
                    warnings,
                });
            }
            Stage::Assembled => {
                let out = preview(&self.state)?.ok_or_else(|| PipelineError::SchemaViolation {
                    file: STATE_FILE.into(),
                    pointer: "/payloads".into(),
                    message: "the questions payload is missing".into(),
                })?;
                let source = fs::read(self.dir.join(SOURCE_FILE))?;
                let zip = write_bundle(&bundle_files(&out.spec, &out.yaml, &source))?;
                write_atomic(&self.dir.join(BUNDLE_FILE), &zip)?;
                self.state.payloads.assembled = Some(AssembledPayload {
                    yaml: out.yaml,
                    bundle_sha256: sha256_hex(&zip),
                    warnings: out.warnings,
                });
            }
            Stage::BindingsReviewed | Stage::QuestionsReviewed => unreachable!("reached by approval"),
        }
        self.state.stage = stage;
        self.audit(stage, "completed", "");
        self.save()?;
        if let Some(h) = &mut self.hook {
            h(stage);
        }
        Ok(())
    }
}

/// Problems with the gate payload at `stage` of a saved state, errors first.
pub fn stage_violations(state: &State, conv: &NamingConventions, stage: Stage) -> Vec<PointerViolation> {
    let p = &state.payloads;
    let mut v = match stage {
        Stage::BindingsDraft | Stage::BindingsReviewed => p
            .bindings
            .as_ref()
            .map(|b| validate_bindings(b, conv))
            .unwrap_or_default(),
        Stage::QuestionsDraft | Stage::QuestionsReviewed => match (&p.questions, &p.bindings) {
            (Some(q), Some(b)) => validate_questions(q, &b.bindings),
            _ => Vec::new(),
        },
        _ => Vec::new(),
    };
    v.sort_by_key(|x| !x.is_error());
    v
}

/// The interview as it would be assembled from the current drafts, without
/// writing anything. `None` until there is a questions draft.
pub fn preview(state: &State) -> Result<Option<Assembled>, PipelineError> {
    let p = &state.payloads;
    let (Some(b), Some(q), Some(ingested)) = (&p.bindings, &p.questions, &p.ingested) else {
        return Ok(None);
    };
    let template_name = template_name(&ingested.source_file);
    let out = assemble(
        b.metadata.clone(),
        q.questions.clone(),
        TemplateSource::Pdf {
            path: &template_name,
            bindings: &b.bindings,
        },
    )?;
    Ok(Some(out))
}

/// The template's file name inside the bundle, from the source name.
fn template_name(source_file: &str) -> String {
    let stem = Path::new(source_file)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut out = String::new();
    for c in stem.chars() {
        if c.is_ascii_alphanumeric() || c == '-' {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_matches('_');
    if out.is_empty() {
        "form.pdf".into()
    } else {
        format!("{out}.pdf")
    }
}

/// Unpaired small fields and lost tokens, for the CLI summary.
pub fn unidentified_fields(bindings: &[VariableBinding]) -> Vec<&VariableBinding> {
    bindings
        .iter()
        .filter(|b| {
            b.source == BindingSource::Missing || (b.source == BindingSource::Checkbox && b.paired != Some(true))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>(), Ok(s));
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert_eq!(Stage::Ingested.prev(), None);
        assert_eq!(Stage::Assembled.next(), None);
        assert!(Stage::BindingsDraft.is_gate() && !Stage::BindingsReviewed.is_gate());
        assert!("reviewed".parse::<Stage>().is_err());
    }

    #[test]
    fn template_names() {
        assert_eq!(
            template_name("Complaint for Modification.pdf"),
            "complaint_for_modification.pdf"
        );
        assert_eq!(template_name("???.pdf"), "form.pdf");
    }

    #[test]
    fn schema_errors_cite_a_pointer() {
        let err = from_json::<State>("state.json", r#"{"run_id": "r", "stage": "stamped", "gated": true, "transcript": "t", "payloads": {"stamped": {"stamped_sha256": 3}}}"#)
            .unwrap_err();
        match err {
            PipelineError::SchemaViolation { pointer, .. } => assert_eq!(pointer, "/payloads/stamped/stamped_sha256"),
            other => panic!("{other}"),
        }
    }
}
