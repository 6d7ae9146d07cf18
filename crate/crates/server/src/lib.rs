//! HTTP/JSON front end for tokstore.
//!
//! File operations (`/pack`, `/unpack`, `/stats`, `/bench`, `/synthetic`,
//! `/dump-batch`) read and write paths on the server's filesystem. Opened
//! archives and batch sessions are held in memory under random ids.

pub mod ops;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokstore::archive::FileSource;
use tokstore::pipeline::{Pipeline, PipelineStats};
use tokstore::{open_archive, ErrorCategory, TokenArchive};
use tokstore_wire::{
    ArchiveInfo, BatchPayload, BenchReport, BenchRequest, CreateSessionRequest, DumpBatchRequest,
    DumpBatchResponse, ErrorBody, Health, NextBatchResponse, OpenArchiveRequest, PackRequest,
    PackResponse, QuantizeRequest, QuantizeResponse, RecordResponse, SeekRequest, SessionInfo,
    StatsRequest, StorageReport, SyntheticRequest, SyntheticResponse, UnpackRequest,
    UnpackResponse,
};
use uuid::Uuid;

type Archive = TokenArchive<FileSource>;
type Session = Arc<Mutex<Pipeline<FileSource>>>;

struct OpenArchive {
    path: PathBuf,
    archive: Arc<Archive>,
}

#[derive(Default)]
pub struct AppState {
    archives: Mutex<HashMap<String, Arc<OpenArchive>>>,
    sessions: Mutex<HashMap<String, Session>>,
}

impl AppState {
    pub fn open_archives(&self) -> usize {
        self.archives.lock().expect("archive map").len()
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.lock().expect("session map").len()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn not_found(what: &str, id: &str) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            body: ErrorBody::not_found(format!("no {what} with id {id}")),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody::internal(message),
        }
    }
}

fn status_for(category: ErrorCategory) -> StatusCode {
    match category {
        ErrorCategory::Input | ErrorCategory::Config => StatusCode::BAD_REQUEST,
        ErrorCategory::Index => StatusCode::NOT_FOUND,
        ErrorCategory::Format
        | ErrorCategory::Corruption
        | ErrorCategory::Truncation
        | ErrorCategory::TableMismatch => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCategory::Io => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<tokstore::Error> for ApiError {
    fn from(e: tokstore::Error) -> Self {
        Self {
            status: status_for(e.category()),
            body: ErrorBody::from(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(category = %self.body.category, "{}", self.body.message);
        } else {
            tracing::debug!(category = %self.body.category, "{}", self.body.message);
        }
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker task failed: {e}")))?
        .map(Json)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/pack", post(pack))
        .route("/unpack", post(unpack))
        .route("/stats", post(stats))
        .route("/bench", post(bench))
        .route("/synthetic", post(synthetic))
        .route("/dump-batch", post(dump_batch))
        .route("/archives", post(open))
        .route("/archives/{id}", get(archive_info).delete(close))
        .route("/archives/{id}/records/{index}", get(record))
        .route("/archives/{id}/quantize", post(quantize))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info).delete(drop_session))
        .route("/sessions/{id}/next", post(next_batch))
        .route("/sessions/{id}/seek", post(seek))
        .route("/sessions/{id}/stats", get(session_stats))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve_on(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `addr` and serves in a background task, returning the bound address.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = serve_on(listener, Arc::new(AppState::default())).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok((local, handle))
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn pack(Json(req): Json<PackRequest>) -> ApiResult<PackResponse> {
    blocking(move || Ok(ops::pack(&req)?)).await
}

async fn unpack(Json(req): Json<UnpackRequest>) -> ApiResult<UnpackResponse> {
    blocking(move || Ok(ops::unpack(&req)?)).await
}

async fn stats(Json(req): Json<StatsRequest>) -> ApiResult<StorageReport> {
    blocking(move || Ok(ops::stats(&req)?)).await
}

async fn bench(Json(req): Json<BenchRequest>) -> ApiResult<BenchReport> {
    blocking(move || Ok(ops::run_bench(&req)?)).await
}

async fn synthetic(Json(req): Json<SyntheticRequest>) -> ApiResult<SyntheticResponse> {
    blocking(move || Ok(ops::synthetic(&req)?)).await
}

async fn dump_batch(Json(req): Json<DumpBatchRequest>) -> ApiResult<DumpBatchResponse> {
    blocking(move || Ok(ops::dump_batches(&req)?)).await
}

fn info(id: &str, entry: &OpenArchive) -> ArchiveInfo {
    ArchiveInfo {
        id: id.to_string(),
        path: entry.path.clone(),
        header: *entry.archive.header(),
        file_len: entry.archive.file_len(),
    }
}

fn lookup_archive(state: &AppState, id: &str) -> Result<Arc<OpenArchive>, ApiError> {
    state
        .archives
        .lock()
        .expect("archive map")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("archive", id))
}

fn lookup_session(state: &AppState, id: &str) -> Result<Session, ApiError> {
    state
        .sessions
        .lock()
        .expect("session map")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("session", id))
}

async fn open(
    State(state): State<Arc<AppState>>,
    Json(req): Json<OpenArchiveRequest>,
) -> ApiResult<ArchiveInfo> {
    let path = req.path.clone();
    let archive = blocking(move || Ok(open_archive(&path)?)).await?.0;
    let entry = Arc::new(OpenArchive {
        path: req.path,
        archive: Arc::new(archive),
    });
    let id = Uuid::new_v4().to_string();
    let out = info(&id, &entry);
    state.archives.lock().expect("archive map").insert(id, entry);
    Ok(Json(out))
}

async fn archive_info(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<ArchiveInfo> {
    let entry = lookup_archive(&state, &id)?;
    Ok(Json(info(&id, &entry)))
}

async fn close(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    state
        .archives
        .lock()
        .expect("archive map")
        .remove(&id)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(|| ApiError::not_found("archive", &id))
}

#[derive(Debug, Deserialize)]
struct RecordQuery {
    #[serde(default)]
    original: bool,
}

async fn record(
    State(state): State<Arc<AppState>>,
    Path((id, index)): Path<(String, u64)>,
    Query(q): Query<RecordQuery>,
) -> ApiResult<RecordResponse> {
    let entry = lookup_archive(&state, &id)?;
    blocking(move || {
        let i = usize::try_from(index).unwrap_or(usize::MAX);
        let archive = &entry.archive;
        let grid = if q.original {
            archive.read_image_original(i)?
        } else {
            archive.read_image(i)?
        };
        Ok(RecordResponse {
            index,
            side: grid.side() as u16,
            label: archive.label(i),
            tokens: grid.into_tokens(),
            original: q.original,
        })
    })
    .await
}

async fn quantize(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<QuantizeRequest>,
) -> ApiResult<QuantizeResponse> {
    let entry = lookup_archive(&state, &id)?;
    blocking(move || {
        let archive = &entry.archive;
        let codes = req
            .vectors
            .iter()
            .map(|v| archive.codebook().quantize(v))
            .collect::<tokstore::Result<Vec<_>>>()?;
        let ranks = codes.iter().map(|&c| archive.permutation().forward(c)).collect();
        Ok(QuantizeResponse { codes, ranks })
    })
    .await
}

fn session_summary(id: &str, p: &Pipeline<FileSource>) -> SessionInfo {
    SessionInfo {
        id: id.to_string(),
        epoch: p.epoch(),
        position: p.position(),
        batches_per_epoch: p.batches_per_epoch(),
        classes: p.classes(),
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateSessionRequest>,
) -> ApiResult<SessionInfo> {
    let pipeline = blocking(move || {
        let archive = Arc::new(open_archive(&req.archive)?);
        Ok(Pipeline::new(archive, req.config)?)
    })
    .await?
    .0;
    let id = Uuid::new_v4().to_string();
    let out = session_summary(&id, &pipeline);
    state
        .sessions
        .lock()
        .expect("session map")
        .insert(id, Arc::new(Mutex::new(pipeline)));
    Ok(Json(out))
}

async fn session_info(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<SessionInfo> {
    let session = lookup_session(&state, &id)?;
    let p = session.lock().map_err(|_| ApiError::internal("session poisoned"))?;
    Ok(Json(session_summary(&id, &p)))
}

async fn drop_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    state
        .sessions
        .lock()
        .expect("session map")
        .remove(&id)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(|| ApiError::not_found("session", &id))
}

async fn next_batch(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<NextBatchResponse> {
    let session = lookup_session(&state, &id)?;
    blocking(move || {
        let mut p = session.lock().map_err(|_| ApiError::internal("session poisoned"))?;
        let batch = p.next_batch()?;
        Ok(NextBatchResponse {
            batch: batch.as_ref().map(BatchPayload::from),
        })
    })
    .await
}

async fn seek(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<SeekRequest>,
) -> ApiResult<SessionInfo> {
    let session = lookup_session(&state, &id)?;
    blocking(move || {
        let mut p = session.lock().map_err(|_| ApiError::internal("session poisoned"))?;
        p.seek(req.epoch, req.batch_index);
        Ok(session_summary(&id, &p))
    })
    .await
}

async fn session_stats(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<PipelineStats> {
    let session = lookup_session(&state, &id)?;
    let p = session.lock().map_err(|_| ApiError::internal("session poisoned"))?;
    Ok(Json(p.stats().clone()))
}
