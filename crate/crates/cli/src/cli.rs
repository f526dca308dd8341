use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use formdraft::llm::Mode;
use formdraft::pipeline::Stage;

#[derive(Debug, Parser)]
#[command(name = "formdraft", version, about = "Draft guided interviews from court forms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    /// TOML configuration file. Defaults to the checkpoint's config.toml.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// live, record or replay; overrides FORMDRAFT_MODE and the config.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replace case-specific text in a DOCX with template variables.
    LabelDocx {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Transcript of model calls; defaults to OUTPUT.transcript.jsonl.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Start (or continue) the pipeline for a fillable PDF.
    AnalyzePdf {
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Promote drafts without waiting for review.
        #[arg(long)]
        no_gate: bool,
        /// Seed the run's transcript from this file.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        stop_after: Option<Stage>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Continue a run from its checkpoint.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Re-run this stage and discard everything after it.
        #[arg(long)]
        force_from: Option<Stage>,
        #[arg(long)]
        stop_after: Option<Stage>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Apply a reviewer patch (JSON: {"patch": [{"path", "value"}]}) to the waiting draft.
    Edit {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        stage: Stage,
        patch: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Approve the draft waiting at a gate and run to the next one.
    Approve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        stage: Stage,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write the interview bundle of a finished run.
    Build {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fill a template from an answers file (JSON, or YAML by extension).
    Fill {
        /// Interview YAML or bundle ZIP.
        spec: PathBuf,
        answers: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Template file; required when SPEC is YAML.
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Coverage metrics over one or more runs.
    Report {
        #[arg(long = "checkpoint", required = true, num_args = 1..)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Serve the review API for a run, or for every run under a folder.
    Review {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 8377)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Require `Authorization: Bearer TOKEN`; defaults to FORMDRAFT_REVIEW_TOKEN.
        #[arg(long)]
        token: Option<String>,
        /// Static files for the review UI.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write field tokens into a fillable PDF, for recording OCR fixtures.
    Stamp {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}
