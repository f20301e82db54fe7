//! HTTP front end for interactive minimal paths and region evolution.
//!
//! Every route lives under `/api/v1`. Work on one session is serialized;
//! distinct sessions run concurrently on the blocking pool.

pub mod error;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post, put};
use axum::{Json, Router};
use minpath_core::io::{decode_image, encode_field};
use serde_json::json;
use tokio::sync::Mutex;
use tower_http::cors::{Any, CorsLayer};
use uuid::Uuid;

pub use error::ApiError;
use session::{DistanceRequest, EvolutionRequest, MetricRequest, PathRequest, Session, TubePathRequest};

#[derive(Debug, Clone)]
pub struct Limits {
    pub max_width: usize,
    pub max_height: usize,
    pub max_theta: usize,
    /// How long a request waits for a busy session before giving up.
    pub lock_timeout: Duration,
    pub request_timeout: Duration,
    pub preview_side: usize,
    pub max_upload_bytes: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_width: 512,
            max_height: 512,
            max_theta: 96,
            lock_timeout: Duration::from_secs(1),
            request_timeout: Duration::from_secs(30),
            preview_side: 256,
            max_upload_bytes: 64 << 20,
        }
    }
}

type SessionMap = HashMap<Uuid, Arc<Mutex<Session>>>;

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<SessionMap>>,
    limits: Arc<Limits>,
}

impl AppState {
    #[must_use]
    pub fn new(limits: Limits) -> Self {
        Self {
            sessions: Arc::default(),
            limits: Arc::new(limits),
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let key = Uuid::parse_str(id).map_err(|_| ApiError::NotFound(id.into()))?;
        self.sessions
            .read()
            .expect("session map lock poisoned")
            .get(&key)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.into()))
    }

    /// Run `f` on the blocking pool with exclusive access to one session.
    async fn with_session<T, F>(&self, id: &str, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Session, &Limits) -> Result<T, ApiError> + Send + 'static,
    {
        let session = self.session(id)?;
        let mut guard = tokio::time::timeout(self.limits.lock_timeout, session.lock_owned())
            .await
            .map_err(|_| ApiError::Locked)?;
        let limits = Arc::clone(&self.limits);
        let job = tokio::task::spawn_blocking(move || f(&mut guard, &limits));
        match tokio::time::timeout(self.limits.request_timeout, job).await {
            Err(_) => Err(ApiError::Timeout(self.limits.request_timeout)),
            Ok(Err(e)) => Err(ApiError::Internal(format!("worker failed: {e}"))),
            Ok(Ok(r)) => r,
        }
    }
}

pub fn router(state: AppState) -> Router {
    let upload = state.limits.max_upload_bytes;
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(describe_session).delete(delete_session))
        .route("/sessions/{id}/metric", put(set_metric))
        .route("/sessions/{id}/distance", post(distance))
        .route("/sessions/{id}/distance/field", get(distance_field))
        .route("/sessions/{id}/path", post(path))
        .route("/sessions/{id}/evolution", post(start_evolution))
        .route("/sessions/{id}/evolution/step", post(step_evolution))
        .route("/sessions/{id}/tube-path", post(tube_path));
    Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(upload))
        .with_state(state)
}

/// CORS layer for a single origin, or any origin for `*`.
pub fn cors(origin: &str) -> Result<CorsLayer, ApiError> {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origin == "*" {
        return Ok(layer.allow_origin(Any));
    }
    let value = HeaderValue::from_str(origin).map_err(|_| ApiError::BadRequest(format!("bad CORS origin '{origin}'")))?;
    Ok(layer.allow_origin(value))
}

pub async fn serve(addr: SocketAddr, cors_origin: Option<&str>, limits: Limits) -> std::io::Result<()> {
    let mut app = router(AppState::new(limits));
    if let Some(origin) = cors_origin {
        app = app.layer(cors(origin).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?);
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}

async fn create_session(State(state): State<AppState>, mut form: Multipart) -> Result<impl IntoResponse, ApiError> {
    let mut bytes = None;
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::BadRequest(e.to_string()))? {
        let is_image = field.name().is_none_or(|n| n == "image");
        let data = field.bytes().await.map_err(|e| ApiError::BadRequest(e.to_string()))?;
        if is_image {
            bytes = Some(data);
            break;
        }
    }
    let bytes = bytes.ok_or_else(|| ApiError::BadRequest("multipart body has no image field".into()))?;
    let limits = Arc::clone(&state.limits);
    let image = tokio::task::spawn_blocking(move || decode_image(&bytes))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let grid = image.grid();
    if grid.width() > limits.max_width || grid.height() > limits.max_height {
        return Err(ApiError::TooLarge(format!(
            "{}x{} image exceeds {}x{}",
            grid.width(),
            grid.height(),
            limits.max_width,
            limits.max_height
        )));
    }
    let id = Uuid::new_v4();
    state
        .sessions
        .write()
        .expect("session map lock poisoned")
        .insert(id, Arc::new(Mutex::new(Session::new(image))));
    Ok((
        StatusCode::CREATED,
        Json(json!({ "id": id.to_string(), "width": grid.width(), "height": grid.height() })),
    ))
}

async fn describe_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let body = state
        .with_session(&id, |s, _| {
            let grid = s.image.grid();
            Ok(json!({
                "width": grid.width(),
                "height": grid.height(),
                "channels": s.image.channels(),
                "metric": s.metric.as_ref().map(|m| json!({ "kind": m.name, "params": m.params })),
                "has_distance": s.distance.is_some(),
                "evolution_k": s.evolution.as_ref().map(|e| e.history.len()),
            }))
        })
        .await?;
    Ok(Json(body))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let key = Uuid::parse_str(&id).map_err(|_| ApiError::NotFound(id.clone()))?;
    match state.sessions.write().expect("session map lock poisoned").remove(&key) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(id)),
    }
}

async fn set_metric(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<MetricRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.with_session(&id, move |s, l| s.set_metric(req, l)).await?))
}

async fn distance(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<DistanceRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.with_session(&id, move |s, l| s.distance(req, l)).await?))
}

async fn distance_field(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let bytes = state
        .with_session(&id, |s, _| Ok(encode_field(&s.distance_field()?)?))
        .await?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes))
}

async fn path(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<PathRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.with_session(&id, move |s, _| s.path(&req)).await?))
}

async fn start_evolution(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<EvolutionRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.with_session(&id, move |s, _| s.start_evolution(&req)).await?))
}

async fn step_evolution(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.with_session(&id, |s, _| s.step_evolution()).await?))
}

async fn tube_path(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<TubePathRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.with_session(&id, move |s, _| s.tube_path(&req)).await?))
}
