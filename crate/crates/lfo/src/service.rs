//! Review service over the sessions in a data directory.
//!
//! Each session sits behind its own read-write lock: edits are serialized,
//! reads share the lock and see a whole draft. Every mutating request returns
//! a fresh validation report.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::{Mutex, RwLock};

use lfo_core::decoder::{run_program, verify_postconditions, ExecutionTrace, SimConfig};
use lfo_core::laban::serialize_score;
use lfo_core::Error;

use crate::inputs::{load_robot, load_world};
use crate::session::{
    list_ids, session_path, valid_id, Export, FramePatch, Session, EDITS_SUFFIX, EXPORT_SUFFIX, TRACE_SUFFIX,
};

pub struct AppState {
    dir: PathBuf,
    sessions: Mutex<HashMap<String, Arc<RwLock<Session>>>>,
}

impl AppState {
    pub fn new(dir: impl Into<PathBuf>) -> Arc<Self> {
        Arc::new(AppState { dir: dir.into(), sessions: Mutex::new(HashMap::new()) })
    }

    /// The open session, loading it from disk on first use.
    async fn session(&self, id: &str) -> Result<Arc<RwLock<Session>>, ApiError> {
        if !valid_id(id) || !session_path(&self.dir, id, crate::session::RECORDING_SUFFIX).exists() {
            return Err(ApiError::not_found(format!("no session `{id}`")));
        }
        let mut map = self.sessions.lock().await;
        if let Some(s) = map.get(id) {
            return Ok(s.clone());
        }
        let s = Arc::new(RwLock::new(Session::open(&self.dir, id)?));
        map.insert(id.to_string(), s.clone());
        Ok(s)
    }
}

/// Error response: `{"error": kind, "message": ..}` plus optional details.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, body: json!({"error": "not_found", "message": message}) }
    }

    fn bad_request(message: String) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, body: json!({"error": "bad_request", "message": message}) }
    }
}

pub fn error_json(e: &Error) -> Value {
    let mut v = json!({"error": e.kind(), "message": e.to_string()});
    if let Error::AtFrame { frame, .. } = e {
        v["frame"] = json!(frame);
    }
    if let Error::AtSegment { segment, .. } = e {
        v["segment"] = json!(segment);
    }
    v
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError { status, body: error_json(&e) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

/// Optional JSON body; an empty body means the default.
fn body_or_default<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/sessions", get(list_sessions))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/laban", get(get_laban))
        .route("/api/session/{id}/frames/{i}", patch(patch_frame))
        .route("/api/session/{id}/validate", post(validate))
        .route("/api/session/{id}/export", post(export))
        .route("/api/session/{id}/simulate", post(simulate))
        .route("/api/session/{id}/trace", get(get_trace))
        .with_state(state)
}

async fn list_sessions(State(st): State<Arc<AppState>>) -> ApiResult {
    let mut out = Vec::new();
    for id in list_ids(&st.dir)? {
        let entry = match st.session(&id).await {
            Ok(s) => {
                let s = s.read().await;
                json!({
                    "id": id,
                    "frames": s.draft.frames.len(),
                    "tasks": s.draft.frames.iter().map(|f| f.task).collect::<Vec<_>>(),
                    "pending_reviews": s.pending_reviews().len(),
                    "violations": s.validation().violations.len(),
                    "edits": s.edits.len(),
                })
            }
            Err(e) => json!({"id": id, "error": e.body}),
        };
        out.push(entry);
    }
    Ok(Json(out).into_response())
}

fn session_view(s: &Session) -> Value {
    json!({
        "id": s.id,
        "recording": s.recording_path.file_name().and_then(|n| n.to_str()),
        "segments": s.segments,
        "program": s.draft,
        "pending_reviews": s.pending_reviews(),
        "validation": s.validation(),
        "edits": s.edits.len(),
    })
}

async fn get_session(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = st.session(&id).await?;
    let s = s.read().await;
    Ok(Json(session_view(&s)).into_response())
}

async fn get_laban(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = st.session(&id).await?;
    let s = s.read().await;
    let score = s.laban()?;
    Ok(Json(json!({"text": serialize_score(&score), "score": score})).into_response())
}

async fn patch_frame(
    State(st): State<Arc<AppState>>,
    UrlPath((id, i)): UrlPath<(String, usize)>,
    body: Bytes,
) -> ApiResult {
    let patch: FramePatch = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let s = st.session(&id).await?;
    let mut s = s.write().await;
    if i >= s.draft.frames.len() {
        return Err(ApiError::not_found(format!("session `{id}` has no frame {i}")));
    }
    let log = session_path(&st.dir, &id, EDITS_SUFFIX);
    let frame = s.edit(i, patch, Some(&log))?.clone();
    Ok(Json(json!({"frame": frame, "validation": s.validation()})).into_response())
}

async fn validate(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = st.session(&id).await?;
    let s = s.read().await;
    Ok(Json(s.validation()).into_response())
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportRequest {
    #[serde(default)]
    force: bool,
}

async fn export(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let req: ExportRequest = body_or_default(&body)?;
    let s = st.session(&id).await?;
    // the write lock keeps edits out until the file is written
    let s = s.write().await;
    match s.export(req.force) {
        Ok(Export::Clean(text)) => {
            std::fs::write(session_path(&st.dir, &id, EXPORT_SUFFIX), &text).map_err(Error::from)?;
            Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
        }
        Ok(Export::Forced(text)) => Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response()),
        Err(report) => Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({
                "error": "violations",
                "message": "program has grammar violations; export with force to override",
                "validation": report,
            }),
        }),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    world: String,
    robot: String,
}

async fn simulate(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let req: SimulateRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let s = st.session(&id).await?;
    let s = s.read().await;
    let report = s.validation();
    if !report.ok {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({"error": "violations", "message": "fix violations before simulating", "validation": report}),
        });
    }
    let world = load_world(&req.world)?;
    let robot = load_robot(&req.robot)?;
    let program = s.draft.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let out = run_program(&program, &world, &robot, &SimConfig::default())?;
        let report = verify_postconditions(&out.trace, &program, &world);
        Ok::<_, Error>((out, report))
    })
    .await
    .map_err(|e| Error::Io(e.to_string()))??;
    let (out, report) = outcome;
    std::fs::write(session_path(&st.dir, &id, TRACE_SUFFIX), out.trace.to_ndjson()).map_err(Error::from)?;
    Ok(Json(json!({
        "completed": out.error.is_none(),
        "error": out.error.as_ref().map(error_json),
        "verification": report,
    }))
    .into_response())
}

async fn get_trace(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let s = st.session(&id).await?;
    // a shared lock orders the read after any in-flight simulation
    let _s = s.read().await;
    let path = session_path(&st.dir, &id, TRACE_SUFFIX);
    if !path.exists() {
        return Err(ApiError::not_found(format!("session `{id}` has not been simulated")));
    }
    let text = std::fs::read_to_string(&path).map_err(Error::from)?;
    ExecutionTrace::from_ndjson(&text)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

/// Binds the port first so a busy port is a startup error.
pub async fn bind(port: u16, dir: &Path) -> lfo_core::Result<(TcpListener, Router)> {
    if !dir.is_dir() {
        return Err(Error::Io(format!("data directory {} does not exist", dir.display())));
    }
    let listener = TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|e| Error::Io(format!("cannot listen on port {port}: {e}")))?;
    Ok((listener, router(AppState::new(dir))))
}

pub async fn serve(port: u16, dir: &Path) -> lfo_core::Result<()> {
    let (listener, app) = bind(port, dir).await?;
    axum::serve(listener, app).await.map_err(Error::from)
}
