//! HTTP API for reviewing drafts. Reads come straight from state.json;
//! writes open the run (taking its lock) one at a time.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Request, State as Ext};
use axum::http::{StatusCode, header};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use formdraft::pipeline::{
    EditRequest, Pipeline, PipelineError, Progress, STATE_FILE, Stage, State, preview, read_state, stage_violations,
};
use serde::Deserialize;
use serde_json::{Value, json};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::cli::ModelArgs;
use crate::commands::load_config;
use crate::error::{CliError, CliResult};

pub struct ServerOptions {
    /// One run folder, or a folder of run folders.
    pub root: PathBuf,
    pub model: ModelArgs,
    pub token: Option<String>,
    pub assets: Option<PathBuf>,
}

struct Inner {
    root: PathBuf,
    model: ModelArgs,
    token: Option<String>,
    writes: tokio::sync::Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": error, "message": message.into() }),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        match e {
            PipelineError::StageOrder(_) => Self::new(StatusCode::CONFLICT, "stage_order", message),
            PipelineError::VersionConflict { expected, actual } => Self {
                status: StatusCode::CONFLICT,
                body: json!({ "error": "version_conflict", "message": message, "expected": expected, "actual": actual }),
            },
            PipelineError::Invalid(violations) => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": "invalid", "message": message, "violations": violations }),
            },
            PipelineError::SchemaViolation {
                pointer, message: m, ..
            } => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({
                    "error": "invalid",
                    "message": message,
                    "violations": [{ "pointer": pointer, "message": m, "severity": "error" }],
                }),
            },
            PipelineError::Assemble(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "assemble", message),
            PipelineError::Locked(_) => Self::new(StatusCode::LOCKED, "locked", message),
            PipelineError::NoCheckpoint(_) => Self::not_found(message),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

impl AppState {
    fn runs(&self) -> Vec<(String, PathBuf)> {
        let root = &self.0.root;
        if root.join(STATE_FILE).exists() {
            return vec![(dir_name(root), root.clone())];
        }
        let mut out: Vec<(String, PathBuf)> = std::fs::read_dir(root)
            .into_iter()
            .flatten()
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.join(STATE_FILE).exists())
            .map(|p| (dir_name(&p), p))
            .collect();
        out.sort();
        out
    }

    fn run_dir(&self, id: &str) -> Result<PathBuf, ApiError> {
        self.runs()
            .into_iter()
            .find(|(name, _)| name == id)
            .map(|(_, p)| p)
            .ok_or_else(|| ApiError::not_found(format!("no run '{id}'")))
    }

    /// Opens the run and applies `f` while holding the write mutex.
    async fn write<T: Send + 'static>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Pipeline) -> Result<T, PipelineError> + Send + 'static,
    ) -> Result<T, ApiError> {
        let dir = self.run_dir(id)?;
        let config = load_config(&self.0.model, Some(&dir))
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "config", e.to_string()))?;
        let _guard = self.0.writes.lock().await;
        tokio::task::spawn_blocking(move || {
            let mut p = Pipeline::open(&dir, config)?;
            f(&mut p)
        })
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
    }

    fn read(&self, id: &str) -> Result<(State, String), ApiError> {
        Ok(read_state(&self.run_dir(id)?)?)
    }
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| "run".into(), |n| n.to_string_lossy().into_owned())
}

fn parse_stage(s: &str) -> Result<Stage, ApiError> {
    s.parse()
        .map_err(|m: String| ApiError::new(StatusCode::BAD_REQUEST, "bad_stage", m))
}

fn summary(id: &str, state: &State, version: &str) -> Value {
    json!({
        "id": id,
        "stage": state.stage,
        "gated": state.gated,
        "awaiting_review": state.gated && state.stage.is_gate(),
        "version": version,
        "metrics": state.metrics_row(),
    })
}

fn progress_json(p: Progress) -> Value {
    match p {
        Progress::AwaitingReview(s) => json!({ "status": "awaiting_review", "stage": s }),
        Progress::Stopped(s) => json!({ "status": "stopped", "stage": s }),
        Progress::Done => json!({ "status": "done", "stage": Stage::Assembled }),
    }
}

async fn list_runs(Ext(app): Ext<AppState>) -> ApiResult {
    let mut out = Vec::new();
    for (id, dir) in app.runs() {
        match read_state(&dir) {
            Ok((state, version)) => out.push(summary(&id, &state, &version)),
            Err(e) => out.push(json!({ "id": id, "error": e.to_string() })),
        }
    }
    Ok(Json(Value::Array(out)))
}

async fn get_run(Ext(app): Ext<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let (state, version) = app.read(&id)?;
    let mut v = summary(&id, &state, &version);
    v["audit"] = json!(state.audit);
    Ok(Json(v))
}

async fn get_stage(Ext(app): Ext<AppState>, UrlPath((id, stage)): UrlPath<(String, String)>) -> ApiResult {
    let stage = parse_stage(&stage)?;
    let dir = app.run_dir(&id)?;
    let (state, version) = read_state(&dir)?;
    let payload = state
        .payload(stage)
        .ok_or_else(|| ApiError::not_found(format!("{id} has not reached {stage}; it is at {}", state.stage)))?;
    let conv = load_config(&app.0.model, Some(&dir))
        .and_then(|c| c.conventions().map_err(CliError::from))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "config", e.to_string()))?;
    Ok(Json(json!({
        "id": id,
        "stage": stage,
        "current_stage": state.stage,
        "editable": stage.is_gate() && state.stage == stage,
        "payload": payload,
        "violations": stage_violations(&state, &conv, stage),
        "version": version,
    })))
}

async fn patch_stage(
    Ext(app): Ext<AppState>,
    UrlPath((id, stage)): UrlPath<(String, String)>,
    Json(req): Json<EditRequest>,
) -> ApiResult {
    let stage = parse_stage(&stage)?;
    let out = app.write(&id, move |p| p.edit(stage, &req)).await?;
    Ok(Json(json!(out)))
}

#[derive(Deserialize, Default)]
struct ApproveBody {
    base_version: Option<String>,
}

async fn approve(Ext(app): Ext<AppState>, UrlPath((id, stage)): UrlPath<(String, String)>, body: Bytes) -> ApiResult {
    let stage = parse_stage(&stage)?;
    let body: ApproveBody = if body.iter().all(u8::is_ascii_whitespace) {
        ApproveBody::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_body", e.to_string()))?
    };
    let (progress, version, state) = app
        .write(&id, move |p| {
            if let Some(v) = body.base_version
                && v != p.version()
            {
                return Err(PipelineError::VersionConflict {
                    expected: v,
                    actual: p.version().to_string(),
                });
            }
            p.approve(stage)?;
            let progress = p.run(None)?;
            Ok((progress, p.version().to_string(), p.state().clone()))
        })
        .await?;
    let mut v = summary(&id, &state, &version);
    v["progress"] = progress_json(progress);
    Ok(Json(v))
}

async fn metrics(Ext(app): Ext<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let (state, _) = app.read(&id)?;
    let row = state
        .metrics_row()
        .ok_or_else(|| ApiError::not_found(format!("{id} has no bindings draft yet")))?;
    Ok(Json(json!(row)))
}

async fn get_preview(Ext(app): Ext<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let (state, version) = app.read(&id)?;
    let out = preview(&state)?.ok_or_else(|| ApiError::not_found(format!("{id} has no questions draft yet")))?;
    Ok(Json(json!({
        "final": state.stage == Stage::Assembled,
        "yaml": out.yaml,
        "overrides": out.overrides,
        "warnings": out.warnings,
        "version": version,
    })))
}

async fn require_token(Ext(app): Ext<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &app.0.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|h| h.to_str().ok())
            .and_then(|h| h.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "a bearer token is required")
                .into_response();
        }
    }
    next.run(req).await
}

pub fn router(opts: ServerOptions) -> Router {
    let app = AppState(Arc::new(Inner {
        root: opts.root,
        model: opts.model,
        token: opts.token,
        writes: tokio::sync::Mutex::new(()),
    }));
    let api = Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/stage/{stage}", get(get_stage).patch(patch_stage))
        .route("/runs/{id}/approve/{stage}", post(approve))
        .route("/runs/{id}/metrics", get(metrics))
        .route("/runs/{id}/preview", get(get_preview))
        .route_layer(middleware::from_fn_with_state(app.clone(), require_token))
        .with_state(app);
    let api = match opts.assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.layer(CorsLayer::permissive())
}

pub fn serve(opts: ServerOptions, addr: impl Into<SocketAddr>) -> CliResult {
    if !opts.root.is_dir() {
        return Err(CliError::Usage(format!("{}: not a folder", opts.root.display())));
    }
    let addr = addr.into();
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("review API listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(opts))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
