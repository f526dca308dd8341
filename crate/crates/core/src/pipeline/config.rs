//! Run configuration: a TOML file, then environment variables, then flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::context::{
    CommandOcr, CommandRasterizer, DEFAULT_DPI, OcrEngine, PairingParams, Rasterizer, RecordedOcr, RecordedRasterizer,
};
use crate::fixtures::model::ScriptedModel;
use crate::llm::{HttpTransport, Limits, LlmClient, Mode, NamingConventions, Prompts, Transcript, Transport};
use crate::pdf::SizePolicy;

pub const ENV_API_KEY: &str = "FORMDRAFT_API_KEY";
pub const ENV_MODEL: &str = "FORMDRAFT_MODEL";
pub const ENV_MODE: &str = "FORMDRAFT_MODE";
pub const ENV_BASE_URL: &str = "FORMDRAFT_BASE_URL";

/// Base URL that selects the built-in scripted model instead of HTTP.
pub const SCRIPTED_BACKEND: &str = "scripted:";

/// Where page images or OCR text come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adapter {
    /// A recorded fixture directory.
    Recorded(PathBuf),
    /// A program and its arguments, with `{...}` slots.
    Command(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mode: Mode,
    pub model: String,
    pub base_url: String,
    /// Only ever read from the environment.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    /// Stop at the two review gates. Off promotes drafts automatically.
    pub gated: bool,
    pub dpi: u32,
    pub rasterizer: Adapter,
    pub ocr: Adapter,
    pub limits: Limits,
    pub pairing: PairingParams,
    pub size_policy: SizePolicy,
    pub prompts_dir: Option<PathBuf>,
    pub conventions: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            mode: Mode::Replay,
            model: "gpt-4o".into(),
            base_url: "https://api.openai.com/v1".into(),
            api_key: None,
            timeout_secs: 120,
            gated: true,
            dpi: DEFAULT_DPI,
            rasterizer: Adapter::Command(
                ["python3", "tools/rasterize.py", "{input}", "{output_dir}", "{dpi}"]
                    .map(String::from)
                    .to_vec(),
            ),
            ocr: Adapter::Command(["python3", "tools/ocr.py", "{image}"].map(String::from).to_vec()),
            limits: Limits::default(),
            pairing: PairingParams::default(),
            size_policy: SizePolicy::default(),
            prompts_dir: None,
            conventions: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// The config as TOML. The API key is never written.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads `path`, resolving relative paths inside it against its folder.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_relative(base);
        }
        Ok(config)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for a in [&mut self.rasterizer, &mut self.ocr] {
            if let Adapter::Recorded(p) = a {
                fix(p);
            }
        }
        if let Some(p) = &mut self.prompts_dir {
            fix(p);
        }
        if let Some(p) = &mut self.conventions {
            fix(p);
        }
    }

    /// Applies the FORMDRAFT_* variables.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), PipelineError> {
        if let Some(k) = get(ENV_API_KEY).filter(|k| !k.is_empty()) {
            self.api_key = Some(k);
        }
        if let Some(m) = get(ENV_MODEL).filter(|m| !m.is_empty()) {
            self.model = m;
        }
        if let Some(m) = get(ENV_MODE).filter(|m| !m.is_empty()) {
            self.mode = m.parse().map_err(PipelineError::Config)?;
        }
        if let Some(u) = get(ENV_BASE_URL).filter(|u| !u.is_empty()) {
            self.base_url = u;
        }
        Ok(())
    }

    pub fn conventions(&self) -> Result<NamingConventions, PipelineError> {
        match &self.conventions {
            Some(p) => Ok(NamingConventions::load(p)?),
            None => Ok(NamingConventions::default()),
        }
    }

    pub fn prompts(&self) -> Result<Prompts, PipelineError> {
        match &self.prompts_dir {
            Some(d) => Ok(Prompts::with_overrides(d)?),
            None => Ok(Prompts::default()),
        }
    }

    pub fn transport(&self) -> Result<Option<Box<dyn Transport>>, PipelineError> {
        if self.mode == Mode::Replay {
            return Ok(None);
        }
        if self.base_url == SCRIPTED_BACKEND {
            return Ok(Some(ScriptedModel::new().boxed()));
        }
        if self.api_key.is_none() {
            log::warn!("{ENV_API_KEY} is not set; requests are sent without credentials");
        }
        Ok(Some(Box::new(HttpTransport::new(
            &self.base_url,
            self.api_key.clone(),
            Duration::from_secs(self.timeout_secs),
        ))))
    }

    pub fn client(&self, transcript: Transcript) -> Result<LlmClient, PipelineError> {
        Ok(LlmClient::new(
            self.mode,
            self.model.clone(),
            self.transport()?,
            transcript,
        ))
    }

    pub fn rasterizer(&self) -> Box<dyn Rasterizer> {
        match &self.rasterizer {
            Adapter::Recorded(dir) => Box::new(RecordedRasterizer { dir: dir.clone() }),
            Adapter::Command(argv) => Box::new(CommandRasterizer {
                program: argv.first().cloned().unwrap_or_default(),
                args: argv.iter().skip(1).cloned().collect(),
            }),
        }
    }

    pub fn ocr_engine(&self) -> Box<dyn OcrEngine> {
        match &self.ocr {
            Adapter::Recorded(dir) => Box::new(RecordedOcr { dir: dir.clone() }),
            Adapter::Command(argv) => Box::new(CommandOcr {
                program: argv.first().cloned().unwrap_or_default(),
                args: argv.iter().skip(1).cloned().collect(),
            }),
        }
    }

    /// Replay from a recorded fixture directory: no network, no tools.
    pub fn offline(fixture: &Path) -> Self {
        Self {
            mode: Mode::Replay,
            model: "scripted".into(),
            base_url: SCRIPTED_BACKEND.into(),
            rasterizer: Adapter::Recorded(fixture.to_path_buf()),
            ocr: Adapter::Recorded(fixture.to_path_buf()),
            ..Self::default()
        }
    }
}
