//! Local HTTP service behind the style editor.
//!
//! Routes:
//!
//! | method | path                 | body                              | reply                    |
//! |--------|----------------------|-----------------------------------|--------------------------|
//! | GET    | `/api/blocks`        |                                   | block registry           |
//! | GET    | `/api/images`        |                                   | `[{id}]`                 |
//! | GET    | `/api/styles`        |                                   | `[{name}]`               |
//! | GET    | `/api/styles/{name}` |                                   | style JSON               |
//! | PUT    | `/api/styles/{name}` | style JSON                        | stored style             |
//! | GET    | `/api/presets`       |                                   | shipped styles           |
//! | POST   | `/api/validate`      | style JSON                        | `{diagnostics}`          |
//! | POST   | `/api/preview`       | `{style, image_id, max_edge?}`    | `image/png`              |
//!
//! Errors are `{"error": ...}` with 400 (malformed JSON or style), 404
//! (unknown image or style), 422 (`{"diagnostics": [...]}`, validation) or
//! 500 (render failure).

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::SystemTime;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use styler::io::{encode_png, load_png};
use styler::pipeline::{blocks, execute, presets, validate, Diagnostic, StylePipeline};
use styler::procedural::thumbnail;
use styler::{Image64, ModelRegistry64};

pub const DEFAULT_MAX_EDGE: usize = 720;

#[derive(Clone, Debug, Default)]
pub struct ServerConfig {
    pub image_dir: PathBuf,
    /// Where `PUT /api/styles` persists; styles live in memory only when
    /// unset.
    pub style_dir: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Invalid(Vec<Diagnostic>),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": m })),
            ApiError::Invalid(d) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": "style failed validation", "diagnostics": d }),
            ),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (code, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Shared state. Styles have a single writer at a time; everything else is
/// read-only after startup.
pub struct AppState {
    image_dir: PathBuf,
    style_dir: Option<PathBuf>,
    styles: RwLock<BTreeMap<String, StylePipeline>>,
    models: ModelRegistry64,
    images: Mutex<HashMap<String, (SystemTime, Arc<Image64>)>>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> styler::Result<Self> {
        let mut styles = BTreeMap::new();
        if let Some(dir) = &config.style_dir {
            std::fs::create_dir_all(dir).map_err(|e| styler::Error::Io { path: dir.clone(), source: e })?;
            for path in json_files(dir)? {
                let s = StylePipeline::load(&path)?;
                styles.insert(s.name.clone(), s);
            }
        }
        let models = match &config.model_dir {
            Some(d) => ModelRegistry64::load_dir(d)?,
            None => ModelRegistry64::new(),
        };
        Ok(Self {
            image_dir: config.image_dir,
            style_dir: config.style_dir,
            styles: RwLock::new(styles),
            models,
            images: Mutex::new(HashMap::new()),
        })
    }

    fn image(&self, id: &str) -> ApiResult<Arc<Image64>> {
        let not_found = || ApiError::NotFound(format!("no image {id:?}"));
        if !safe_name(id) {
            return Err(not_found());
        }
        let path = self.image_dir.join(id);
        let modified = std::fs::metadata(&path)
            .and_then(|m| m.modified())
            .map_err(|_| not_found())?;
        if let Some((t, img)) = self.images.lock().unwrap().get(id) {
            if *t == modified {
                return Ok(img.clone());
            }
        }
        let img = Arc::new(load_png(&path).map_err(|e| ApiError::Internal(e.to_string()))?);
        self.images.lock().unwrap().insert(id.to_string(), (modified, img.clone()));
        Ok(img)
    }
}

fn json_files(dir: &Path) -> styler::Result<Vec<PathBuf>> {
    let io = |e| styler::Error::Io { path: dir.to_path_buf(), source: e };
    let mut v = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.extension().is_some_and(|e| e == "json") {
            v.push(p);
        }
    }
    v.sort();
    Ok(v)
}

/// Plain file names only: no separators, no leading dot.
fn safe_name(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('.')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn parse_style(v: &Value) -> ApiResult<StylePipeline> {
    StylePipeline::deserialize(v).map_err(|e| ApiError::BadRequest(format!("invalid style: {e}")))
}

fn parse_body(body: &Bytes) -> ApiResult<Value> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid JSON: {e}")))
}

fn checked(style: StylePipeline) -> ApiResult<StylePipeline> {
    let diags = validate(&style);
    if diags.is_empty() {
        Ok(style)
    } else {
        Err(ApiError::Invalid(diags))
    }
}

async fn get_blocks() -> impl IntoResponse {
    Json(blocks())
}

#[derive(Serialize)]
struct ImageEntry {
    id: String,
}

async fn get_images(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<ImageEntry>>> {
    let entries = std::fs::read_dir(&st.image_dir).map_err(|e| ApiError::Internal(e.to_string()))?;
    let mut ids: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| safe_name(n) && n.to_ascii_lowercase().ends_with(".png"))
        .collect();
    ids.sort();
    Ok(Json(ids.into_iter().map(|id| ImageEntry { id }).collect()))
}

#[derive(Serialize)]
struct StyleEntry {
    name: String,
}

async fn list_styles(State(st): State<Arc<AppState>>) -> Json<Vec<StyleEntry>> {
    let styles = st.styles.read().unwrap();
    Json(styles.keys().map(|name| StyleEntry { name: name.clone() }).collect())
}

async fn get_style(State(st): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> ApiResult<Json<StylePipeline>> {
    st.styles
        .read()
        .unwrap()
        .get(&name)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("no style {name:?}")))
}

/// Stores a style under `name`; the body's own name is replaced.
async fn put_style(
    State(st): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<StylePipeline>> {
    if !safe_name(&name) {
        return Err(ApiError::BadRequest(format!("style names use [A-Za-z0-9._-], got {name:?}")));
    }
    let mut style = parse_style(&parse_body(&body)?)?;
    style.name = name.clone();
    let style = checked(style)?;
    let mut styles = st.styles.write().unwrap();
    if let Some(dir) = &st.style_dir {
        style
            .save(dir.join(format!("{name}.json")))
            .map_err(|e| ApiError::Internal(e.to_string()))?;
    }
    styles.insert(name, style.clone());
    Ok(Json(style))
}

async fn get_presets() -> Json<Vec<StylePipeline>> {
    Json(presets())
}

async fn post_validate(body: Bytes) -> ApiResult<Json<Value>> {
    let style = parse_style(&parse_body(&body)?)?;
    Ok(Json(json!({ "diagnostics": validate(&style) })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewRequest {
    style: Value,
    image_id: String,
    #[serde(default)]
    max_edge: Option<usize>,
}

async fn post_preview(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let req: PreviewRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("invalid preview request: {e}")))?;
    let style = checked(parse_style(&req.style)?)?;
    let max_edge = req.max_edge.unwrap_or(DEFAULT_MAX_EDGE);
    if max_edge == 0 {
        return Err(ApiError::BadRequest("max_edge must be at least 1".into()));
    }
    let img = st.image(&req.image_id)?;
    let png = tokio::task::spawn_blocking(move || -> styler::Result<Vec<u8>> {
        let small = thumbnail(&img, max_edge)?;
        encode_png(&execute(&style, &small, &st.models)?)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/blocks", get(get_blocks))
        .route("/api/images", get(get_images))
        .route("/api/styles", get(list_styles))
        .route("/api/styles/{name}", get(get_style).put(put_style))
        .route("/api/presets", get(get_presets))
        .route("/api/validate", post(post_validate))
        .route("/api/preview", post(post_preview))
        .with_state(state)
}

/// Binds `127.0.0.1:port` and serves until the process ends.
pub async fn serve(config: ServerConfig, port: u16) -> std::io::Result<()> {
    let state = AppState::new(config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], port))).await?;
    axum::serve(listener, router(Arc::new(state))).await
}
