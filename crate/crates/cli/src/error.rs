use std::fmt;

use formdraft::pipeline::PipelineError;

/// Exit status 2 for usage problems, 1 for everything the tool tried and
/// could not do.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Invalid(v) => {
                let lines: Vec<String> = v.iter().map(|x| format!("  {} {}", x.pointer, x.message)).collect();
                CliError::Domain(format!("the draft has {} problem(s):\n{}", v.len(), lines.join("\n")))
            }
            PipelineError::Config(m) => CliError::Usage(format!("configuration: {m}")),
            other => CliError::Domain(other.to_string()),
        }
    }
}

macro_rules! domain_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain(e.to_string())
            }
        })*
    };
}

domain_from!(
    formdraft::docx::DocxError,
    formdraft::llm::LlmError,
    formdraft::interview::InterviewError,
    formdraft::pdf::PdfError,
    std::io::Error
);

pub type CliResult<T = ()> = Result<T, CliError>;
