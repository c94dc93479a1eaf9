//! HTTP JSON facade over the engine.
//!
//! | method | path             | body                         |
//! |--------|------------------|------------------------------|
//! | POST   | `/update`        | JSON array of documents      |
//! | POST   | `/traverse`      | traversal request            |
//! | POST   | `/snapshot/save` | `{"name": "<file in data dir>"}` |
//! | POST   | `/snapshot/load` | `{"name": "<file in data dir>"}` |
//! | GET    | `/schema`        |                              |
//!
//! Updates go through the single index writer and are all-or-nothing per request.
//! Traversals run against whatever snapshot is published when they start.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use skg_core::traversal::DEFAULT_DEPTH_CAP;
use skg_core::{
    load_snapshot, save_snapshot, Document, IndexSnapshot, IndexWriter, Schema, ScorerKind, SkgError,
    TraversalOptions, TraversalRequest, Traverser,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    /// Schema for a fresh index. Without one the index starts with an open schema.
    #[serde(default)]
    pub schema_file: Option<PathBuf>,
    #[serde(default = "default_depth_cap")]
    pub depth_cap: usize,
    #[serde(default)]
    pub default_scorer: ScorerKind,
}

fn default_listen() -> SocketAddr {
    ([127, 0, 0, 1], 8983).into()
}

fn default_depth_cap() -> usize {
    DEFAULT_DEPTH_CAP
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            listen: default_listen(),
            data_dir: data_dir.into(),
            schema_file: None,
            depth_cap: DEFAULT_DEPTH_CAP,
            default_scorer: ScorerKind::Relatedness,
        }
    }

    /// Checks the invariants and creates the data directory if needed.
    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.depth_cap >= 1, "depth_cap must be at least 1");
        std::fs::create_dir_all(&self.data_dir)?;
        let probe = self.data_dir.join(".write-probe");
        std::fs::write(&probe, b"")
            .map_err(|e| anyhow::anyhow!("data directory {} is not writable: {e}", self.data_dir.display()))?;
        std::fs::remove_file(probe)?;
        Ok(())
    }

    pub fn load_schema(&self) -> anyhow::Result<Schema> {
        Ok(match &self.schema_file {
            Some(path) => Schema::from_json(&std::fs::read_to_string(path)?)?,
            None => Schema::new([])?.open(skg_core::FieldKind::ExactString),
        })
    }
}

pub struct AppState {
    config: ServiceConfig,
    writer: Mutex<IndexWriter>,
    published: RwLock<Arc<IndexSnapshot>>,
}

impl AppState {
    pub fn new(config: ServiceConfig, schema: Schema) -> Arc<Self> {
        let writer = IndexWriter::new(schema);
        Arc::new(AppState {
            published: RwLock::new(writer.snapshot()),
            writer: Mutex::new(writer),
            config,
        })
    }

    pub fn from_config(config: ServiceConfig) -> anyhow::Result<Arc<Self>> {
        config.validate()?;
        let schema = config.load_schema()?;
        Ok(AppState::new(config, schema))
    }

    pub fn snapshot(&self) -> Arc<IndexSnapshot> {
        self.published.read().clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/update", post(handle_update))
        .route("/traverse", post(handle_traverse))
        .route("/snapshot/save", post(handle_save))
        .route("/snapshot/load", post(handle_load))
        .route("/schema", get(handle_schema))
        .with_state(state)
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let listen = config.listen;
    let state = AppState::from_config(config)?;
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    details: Vec<Value>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            details: Vec::new(),
        }
    }
}

impl From<SkgError> for ApiError {
    fn from(e: SkgError) -> Self {
        let status = match &e {
            SkgError::UnknownField(_) | SkgError::NotAnalyzed(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SkgError::VersionMismatch { .. } | SkgError::CorruptSnapshot(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SkgError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
            SkgError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if !self.details.is_empty() {
            body["details"] = Value::Array(self.details);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid JSON body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn handle_update(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let items: Vec<Value> = parse_body(&body)?;
    blocking(move || {
        let mut writer = state.writer.lock();
        let mut errors = Vec::new();
        for (index, item) in items.iter().enumerate() {
            let result = Document::from_json(item).and_then(|doc| writer.add_document(&doc));
            if let Err(e) = result {
                errors.push(json!({
                    "index": index,
                    "id": item.get("id").cloned().unwrap_or(Value::Null),
                    "error": e.to_string(),
                }));
            }
        }
        if !errors.is_empty() {
            writer.rollback();
            let mut err = ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("{} of {} documents rejected; nothing indexed", errors.len(), items.len()),
            );
            err.details = errors;
            return Err(err);
        }
        let snapshot = writer.commit();
        *state.published.write() = snapshot.clone();
        Ok(Json(json!({ "indexed": items.len(), "doc_count": snapshot.doc_count() })))
    })
    .await
}

async fn handle_traverse(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let request: TraversalRequest = parse_body(&body)?;
    blocking(move || {
        let snapshot = state.snapshot();
        let options = TraversalOptions {
            depth_cap: state.config.depth_cap,
            default_scorer: state.config.default_scorer,
        };
        let response = Traverser::new(&snapshot, options).traverse(&request)?;
        Ok(Json(serde_json::to_value(response).expect("response serializes")))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotName {
    name: String,
}

/// Resolves a snapshot name to a file directly inside the data directory.
fn snapshot_path(data_dir: &Path, name: &str) -> ApiResult<PathBuf> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if !ok {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("invalid snapshot name `{name}`: use letters, digits, '.', '_' or '-'"),
        ));
    }
    Ok(data_dir.join(name))
}

async fn handle_save(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let SnapshotName { name } = parse_body(&body)?;
    let path = snapshot_path(&state.config.data_dir, &name)?;
    blocking(move || {
        let snapshot = state.snapshot();
        save_snapshot(&snapshot, &path)?;
        Ok(Json(json!({
            "saved": name,
            "doc_count": snapshot.doc_count(),
            "generation": snapshot.generation(),
        })))
    })
    .await
}

async fn handle_load(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<Value>> {
    let SnapshotName { name } = parse_body(&body)?;
    let path = snapshot_path(&state.config.data_dir, &name)?;
    blocking(move || {
        let snapshot = Arc::new(load_snapshot(&path)?);
        let mut writer = state.writer.lock();
        *writer = IndexWriter::from_snapshot(snapshot.clone());
        *state.published.write() = snapshot.clone();
        Ok(Json(json!({
            "loaded": name,
            "doc_count": snapshot.doc_count(),
            "generation": snapshot.generation(),
        })))
    })
    .await
}

async fn handle_schema(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(serde_json::to_value(state.snapshot().schema()).expect("schema serializes"))
}
