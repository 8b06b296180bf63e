//! HTTP scoring service. Models are loaded once at startup and shared
//! read-only between handlers.
//!
//! The service only ever adds reject-side evidence: a face-matcher rejection
//! is never overridden by an accept here.

use std::collections::BTreeMap;
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
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::artifact::{load_model_dir, ArtifactError, ModelArtifact};
use crate::classifiers::ClassifierError;
use crate::preprocess::{PreprocessError, WindowSpec};
use crate::protocols::{Decision, Direction};
use crate::trace::{parse_csv, parse_meta, AttackType, ChannelSelector, Label, MotionTrace, TraceError, N_CHANNELS};
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub model_id: String,
    #[serde(default)]
    pub claimed_id: Option<u32>,
    pub trace: TracePayload,
}

/// Either the canonical CSV plus its sidecar, or the same data inline.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum TracePayload {
    Canonical {
        csv: String,
        /// Sidecar as an object or as a JSON string.
        meta: Value,
    },
    Inline {
        timestamps_ms: Vec<i64>,
        samples: Vec<Vec<f64>>,
        camera_open_ms: i64,
        capture_ms: i64,
    },
}

impl TracePayload {
    pub fn into_trace(self) -> Result<MotionTrace, TraceError> {
        match self {
            TracePayload::Canonical { csv, meta } => {
                let meta = match meta {
                    Value::String(s) => parse_meta(s.as_bytes())?,
                    other => parse_meta(other.to_string().as_bytes())?,
                };
                let (timestamps_ms, samples) = parse_csv(csv.as_bytes())?;
                let trace = MotionTrace {
                    trace_id: meta.trace_id,
                    participant_id: meta.participant_id,
                    samples,
                    timestamps_ms,
                    camera_open_ms: meta.camera_open_ms,
                    capture_ms: meta.capture_ms,
                    label: meta.label,
                    attack_type: meta.attack_type,
                };
                trace.validate()?;
                Ok(trace)
            }
            TracePayload::Inline {
                timestamps_ms,
                samples,
                camera_open_ms,
                capture_ms,
            } => {
                let rows = samples
                    .into_iter()
                    .enumerate()
                    .map(|(i, row)| {
                        <[f64; N_CHANNELS]>::try_from(row.as_slice()).map_err(|_| TraceError::Malformed {
                            line: i + 1,
                            reason: format!("expected {N_CHANNELS} values, found {}", row.len()),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let trace = MotionTrace {
                    trace_id: "inline".to_string(),
                    participant_id: None,
                    samples: rows,
                    timestamps_ms,
                    camera_open_ms,
                    capture_ms,
                    label: Label::Bonafide,
                    attack_type: AttackType::None,
                };
                trace.validate()?;
                Ok(trace)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub model_id: String,
    pub score: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub direction: Direction,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub kind: String,
    pub window: WindowSpec,
    pub channels: ChannelSelector,
    pub direction: Direction,
    pub threshold: f64,
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::Trace(_) | Error::Artifact(ArtifactError::MissingClaim) => StatusCode::BAD_REQUEST,
        Error::Classifier(ClassifierError::UnknownClaim(_)) => StatusCode::BAD_REQUEST,
        Error::Preprocess(PreprocessError::WindowOutOfRange { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

type Models = Arc<BTreeMap<String, ModelArtifact>>;

pub fn router(models: BTreeMap<String, ModelArtifact>) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/models", get(list_models))
        .with_state(Arc::new(models))
}

async fn list_models(State(models): State<Models>) -> Json<Vec<ModelInfo>> {
    Json(
        models
            .values()
            .map(|m| ModelInfo {
                model_id: m.model_id.clone(),
                kind: m.kind().to_string(),
                window: m.window,
                channels: m.channels.clone(),
                direction: m.threshold.direction,
                threshold: m.threshold.value,
            })
            .collect(),
    )
}

async fn score(State(models): State<Models>, body: Bytes) -> Result<Json<ScoreResponse>, ApiError> {
    let started = Instant::now();
    let req: ScoreRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))?;
    if !models.contains_key(&req.model_id) {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown model `{}`", req.model_id)));
    }
    let outcome = tokio::task::spawn_blocking(move || {
        let model = &models[&req.model_id];
        let trace = req.trace.into_trace()?;
        model.score_trace(&trace, req.claimed_id).map(|o| (req.model_id, o))
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let (model_id, outcome) = outcome.map_err(|e| ApiError(status_of(&e), e.to_string()))?;
    Ok(Json(ScoreResponse {
        model_id,
        score: outcome.score,
        threshold: outcome.threshold,
        decision: outcome.decision,
        direction: outcome.direction,
        latency_ms: started.elapsed().as_secs_f64() * 1e3,
    }))
}

/// Serves until the listener fails or ctrl-c arrives.
pub async fn serve(listener: tokio::net::TcpListener, models: BTreeMap<String, ModelArtifact>) -> std::io::Result<()> {
    axum::serve(listener, router(models))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub fn serve_blocking(addr: &str, models_dir: &Path) -> Result<()> {
    let models = load_model_dir(models_dir)?;
    let addr: SocketAddr = addr
        .parse()
        .map_err(|e| Error::Config(format!("bad listen address `{addr}`: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("starting runtime", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(format!("binding {addr}"), e))?;
        log::info!("serving {} models on {addr}", models.len());
        eprintln!("listening on {}", listener.local_addr().map_err(|e| Error::io("local addr", e))?);
        serve(listener, models).await.map_err(|e| Error::io("serving", e))
    })
}
