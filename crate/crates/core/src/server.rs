//! HTTP/JSON service: generation, refinement and vocabulary endpoints, plus optional
//! static hosting of the studio assets.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{error, info};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::condition::{Condition, SKETCH_CELLS, SKETCH_SIDE, VOCABULARY, VOCAB_VERSION};
use crate::config::AppConfig;
use crate::denoiser::{DenoiserParams, LoadedModel};
use crate::diffusion::{refine, sample, DiffusionSchedule, SamplerConfig};
use crate::error::{field_path, Error, Result};
use crate::layout::{Layout, N_MAX};
use crate::rules::{RuleConfig, RuleReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    #[serde(default)]
    pub prompt: String,
    #[serde(default)]
    pub sketch: Option<Vec<f64>>,
    pub seed: u64,
    #[serde(default = "yes")]
    pub projection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineBody {
    pub layout: Layout,
    pub pinned: Vec<usize>,
    #[serde(default)]
    pub prompt: Option<String>,
    #[serde(default)]
    pub sketch: Option<Vec<f64>>,
    pub seed: u64,
    #[serde(default)]
    pub t_start: Option<usize>,
    #[serde(default = "yes")]
    pub projection: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub layout: Layout,
    pub rule_report: RuleReport,
    pub sample_time_ms: f64,
    pub model_version: String,
}

/// Failure of one request. `BadRequest` carries the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    BadRequest { error: String, field: String },
    Internal(String),
}

impl ApiError {
    fn bad(field: impl Into<String>, error: impl Into<String>) -> Self {
        ApiError::BadRequest {
            error: error.into(),
            field: field.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::BadRequest { error, field } => (
                StatusCode::BAD_REQUEST,
                Json(json!({ "error": error, "field": field })),
            )
                .into_response(),
            ApiError::Internal(message) => {
                let id = uuid::Uuid::new_v4().to_string();
                error!("internal error {id}: {message}");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    Json(json!({ "error": "internal error", "id": id })),
                )
                    .into_response()
            }
        }
    }
}

/// Immutable state shared by all requests.
#[derive(Debug)]
pub struct AppState {
    pub params: DenoiserParams,
    pub schedule: DiffusionSchedule,
    pub rules: RuleConfig,
    pub projection_every: usize,
    pub refine_t_start: usize,
    pub model_version: String,
}

fn check_sketch(sketch: Option<&Vec<f64>>) -> Result<(), ApiError> {
    let Some(grid) = sketch else { return Ok(()) };
    if grid.len() != SKETCH_CELLS {
        return Err(ApiError::bad(
            "sketch",
            format!("sketch must have {SKETCH_CELLS} cells, got {}", grid.len()),
        ));
    }
    if let Some(i) = grid.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(ApiError::bad(format!("sketch[{i}]"), "sketch values must lie in [0, 1]"));
    }
    Ok(())
}

impl AppState {
    pub fn new(model: LoadedModel, cfg: &AppConfig) -> Result<Self> {
        let schedule = model.schedule.build()?;
        model.params.check_timesteps(schedule.timesteps())?;
        let refine_t_start = cfg.refine_t_start().min(schedule.timesteps());
        Ok(Self {
            params: model.params,
            schedule,
            rules: cfg.rules,
            projection_every: cfg.sampling.projection_every,
            refine_t_start,
            model_version: model.version,
        })
    }

    fn sampler(&self, seed: u64, condition: Option<Condition>, projection: bool) -> SamplerConfig {
        let mut cfg = SamplerConfig::new(seed)
            .with_projection_every(if projection { self.projection_every } else { 0 });
        cfg.rules = self.rules;
        cfg.condition = condition;
        cfg
    }

    fn respond(&self, layout: Layout, started: Instant) -> GenerateResponse {
        GenerateResponse {
            rule_report: RuleReport::of(&layout, &self.rules),
            layout,
            sample_time_ms: started.elapsed().as_secs_f64() * 1e3,
            model_version: self.model_version.clone(),
        }
    }

    pub fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse, ApiError> {
        check_sketch(req.sketch.as_ref())?;
        let started = Instant::now();
        let condition = Condition::encode(&req.prompt, req.sketch.as_deref())
            .map_err(|e| ApiError::bad("sketch", e.to_string()))?;
        let cfg = self.sampler(req.seed, Some(condition), req.projection);
        let layout = sample(&cfg, &self.params, &self.schedule)?;
        Ok(self.respond(layout, started))
    }

    pub fn refine(&self, req: &RefineBody) -> Result<GenerateResponse, ApiError> {
        if req.layout.len() > N_MAX {
            return Err(ApiError::bad(
                "layout.components",
                format!("at most {N_MAX} components are supported"),
            ));
        }
        req.layout
            .validate()
            .map_err(|e| ApiError::bad("layout", e.to_string()))?;
        if let Some(k) = req.pinned.iter().position(|&i| i >= req.layout.len()) {
            return Err(ApiError::bad(
                format!("pinned[{k}]"),
                format!(
                    "index {} out of range for layout with {} components",
                    req.pinned[k],
                    req.layout.len()
                ),
            ));
        }
        check_sketch(req.sketch.as_ref())?;
        let t_max = self.schedule.timesteps();
        let t_start = req.t_start.unwrap_or(self.refine_t_start);
        if t_start == 0 || t_start > t_max {
            return Err(ApiError::bad("t_start", format!("must be in 1..={t_max}")));
        }
        let started = Instant::now();
        let condition = match (&req.prompt, &req.sketch) {
            (None, None) => None,
            (prompt, sketch) => Some(
                Condition::encode(prompt.as_deref().unwrap_or(""), sketch.as_deref())
                    .map_err(|e| ApiError::bad("sketch", e.to_string()))?,
            ),
        };
        let cfg = self.sampler(req.seed, condition, req.projection);
        let layout = refine(&req.layout, &req.pinned, &cfg, t_start, &self.params, &self.schedule)?;
        Ok(self.respond(layout, started))
    }
}

/// Parses a JSON body, reporting the dotted path of the first offending field.
/// Syntax errors are reported against `body`.
pub fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let value: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let message = e.inner().to_string();
        let field = if e.inner().is_data() {
            field_path(&e.path().to_string(), &message)
        } else {
            String::new()
        };
        ApiError::bad(if field.is_empty() { "body".into() } else { field }, message)
    })?;
    Ok(value)
}

async fn run_blocking<F>(state: Arc<AppState>, f: F) -> Response
where
    F: FnOnce(&AppState) -> Result<GenerateResponse, ApiError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&state)).await {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ApiError::Internal(format!("worker failed: {e}")).into_response(),
    }
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn vocab() -> Json<Value> {
    Json(json!({
        "version": VOCAB_VERSION,
        "keywords": VOCABULARY,
        "sketch": { "rows": SKETCH_SIDE, "cols": SKETCH_SIDE },
    }))
}

async fn generate_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    match parse_body::<GenerateRequest>(&body) {
        Ok(req) => run_blocking(state, move |s| s.generate(&req)).await,
        Err(e) => e.into_response(),
    }
}

async fn refine_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    match parse_body::<RefineBody>(&body) {
        Ok(req) => run_blocking(state, move |s| s.refine(&req)).await,
        Err(e) => e.into_response(),
    }
}

async fn not_found() -> Response {
    (StatusCode::NOT_FOUND, Json(json!({ "error": "not found" }))).into_response()
}

async fn method_not_allowed() -> Response {
    (
        StatusCode::METHOD_NOT_ALLOWED,
        Json(json!({ "error": "method not allowed" })),
    )
        .into_response()
}

/// Routes of the service. With `static_dir`, unmatched paths are served from it.
pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/api/vocab", get(vocab))
        .route("/api/generate", post(generate_handler))
        .route("/api/refine", post(refine_handler))
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(
            ServeDir::new(dir).not_found_service(axum::routing::any(not_found).with_state(())),
        ),
        None => api.fallback(not_found),
    }
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>, static_dir: Option<&Path>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::InvalidArgument(format!("cannot bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    info!("listening on http://{local}");
    axum::serve(listener, router(state, static_dir))
        .await
        .map_err(|e| Error::InvalidArgument(format!("server failed: {e}")))
}
