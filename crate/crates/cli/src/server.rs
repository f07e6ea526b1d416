//! Local HTTP service for the blob review UI.
//!
//! ```text
//! GET  /api/pages                 [{"id", "image_w", "image_h"}]
//! GET  /api/pages/{id}/image      image bytes
//! GET  /api/pages/{id}/manifest   manifest JSON
//! PUT  /api/pages/{id}/manifest   204, 400 (schema or bounds), 404
//! ```
//!
//! A page is a PNG or JPEG in the workspace directory; its id is the file
//! stem and its manifest is `<stem>.json` beside it. A page without a
//! manifest is served an empty one.

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Component, Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use scanclass::imaging::image_dimensions;
use scanclass::segmentation::{load_manifest, save_manifest};
use scanclass::{BlobManifest, Error};
use serde::Serialize;
use tokio::sync::Mutex;

use crate::commands::manifest_path_for;
use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageInfo {
    pub id: String,
    pub image_w: u32,
    pub image_h: u32,
}

struct AppState {
    workspace: PathBuf,
    ui_dir: Option<PathBuf>,
    /// One lock per page id so manifest writes for a page never interleave.
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl AppState {
    async fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().await.entry(id.to_string()).or_default().clone()
    }
}

fn image_kind(path: &FsPath) -> Option<&'static str> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "png" => Some("image/png"),
        "jpg" | "jpeg" => Some("image/jpeg"),
        _ => None,
    }
}

/// Page images in the workspace, sorted by path. When two images share a
/// stem the first one wins.
pub fn list_page_images(workspace: &FsPath) -> Result<Vec<(String, PathBuf)>, Error> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(workspace)
        .map_err(|e| Error::Io {
            path: workspace.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && image_kind(p).is_some())
        .collect();
    paths.sort();
    let mut pages: Vec<(String, PathBuf)> = Vec::new();
    for p in paths {
        let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if !pages.iter().any(|(seen, _)| *seen == id) {
            pages.push((id, p));
        }
    }
    Ok(pages)
}

fn find_page(workspace: &FsPath, id: &str) -> Result<Option<PathBuf>, Error> {
    Ok(list_page_images(workspace)?
        .into_iter()
        .find(|(page, _)| page == id)
        .map(|(_, p)| p))
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    let body = serde_json::json!({ "error": message.into() });
    (status, Json(body)).into_response()
}

fn internal(e: impl std::fmt::Display) -> Response {
    error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

fn json_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn list_pages(State(state): State<Arc<AppState>>) -> Response {
    let pages = match list_page_images(&state.workspace) {
        Ok(p) => p,
        Err(e) => return internal(e),
    };
    let mut out = Vec::with_capacity(pages.len());
    for (id, path) in pages {
        match image_dimensions(&path) {
            Ok((w, h)) => out.push(PageInfo {
                id,
                image_w: w,
                image_h: h,
            }),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    Json(out).into_response()
}

async fn page_image(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let path = match find_page(&state.workspace, &id) {
        Ok(Some(p)) => p,
        Ok(None) => return error_response(StatusCode::NOT_FOUND, format!("unknown page {id:?}")),
        Err(e) => return internal(e),
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let kind = image_kind(&path).expect("listed pages are images");
            ([(header::CONTENT_TYPE, kind)], bytes).into_response()
        }
        Err(e) => internal(e),
    }
}

fn current_manifest(image: &FsPath) -> Result<BlobManifest, Error> {
    let manifest_path = manifest_path_for(image);
    if manifest_path.exists() {
        return load_manifest(&manifest_path);
    }
    let (w, h) = image_dimensions(image)?;
    let name = image.file_name().unwrap_or_default().to_string_lossy().into_owned();
    Ok(BlobManifest::new(name, w, h, Vec::new()))
}

async fn get_manifest(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let image = match find_page(&state.workspace, &id) {
        Ok(Some(p)) => p,
        Ok(None) => return error_response(StatusCode::NOT_FOUND, format!("unknown page {id:?}")),
        Err(e) => return internal(e),
    };
    let lock = state.lock_for(&id).await;
    let _guard = lock.lock().await;
    match current_manifest(&image) {
        Ok(m) => json_response(m.to_json()),
        Err(e) => internal(e),
    }
}

/// Checks a PUT body against the schema and the page it is stored for.
pub fn validate_upload(body: &[u8], image_w: u32, image_h: u32) -> Result<BlobManifest, String> {
    let text = std::str::from_utf8(body).map_err(|e| format!("body is not UTF-8: {e}"))?;
    let manifest = BlobManifest::from_json(text).map_err(|e| match e {
        Error::Schema(msg) => msg,
        other => other.to_string(),
    })?;
    if (manifest.image_w, manifest.image_h) != (image_w, image_h) {
        return Err(format!(
            "image_w/image_h: manifest says {}x{} but the page is {image_w}x{image_h}",
            manifest.image_w, manifest.image_h
        ));
    }
    Ok(manifest)
}

async fn put_manifest(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Response {
    let image = match find_page(&state.workspace, &id) {
        Ok(Some(p)) => p,
        Ok(None) => return error_response(StatusCode::NOT_FOUND, format!("unknown page {id:?}")),
        Err(e) => return internal(e),
    };
    let (w, h) = match image_dimensions(&image) {
        Ok(d) => d,
        Err(e) => return internal(e),
    };
    let manifest = match validate_upload(&body, w, h) {
        Ok(m) => m,
        Err(msg) => return error_response(StatusCode::BAD_REQUEST, msg),
    };
    let lock = state.lock_for(&id).await;
    let _guard = lock.lock().await;
    match save_manifest(&manifest, manifest_path_for(&image)) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => internal(e),
    }
}

fn static_path(root: &FsPath, uri_path: &str) -> Option<PathBuf> {
    let rel = uri_path.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = FsPath::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    Some(root.join(rel))
}

fn content_type(path: &FsPath) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "wasm" => "application/wasm",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(state): State<Arc<AppState>>, uri: Uri) -> Response {
    let Some(root) = state.ui_dir.as_deref() else {
        return error_response(StatusCode::NOT_FOUND, "not found");
    };
    let Some(path) = static_path(root, uri.path()) else {
        return error_response(StatusCode::NOT_FOUND, "not found");
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => error_response(StatusCode::NOT_FOUND, "not found"),
    }
}

pub fn router(workspace: PathBuf, ui_dir: Option<PathBuf>) -> Router {
    let state = Arc::new(AppState {
        workspace,
        ui_dir,
        locks: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/api/pages", get(list_pages))
        .route("/api/pages/{id}/image", get(page_image))
        .route("/api/pages/{id}/manifest", get(get_manifest).put(put_manifest))
        .fallback(get(static_file))
        .with_state(state)
}

/// Binds the loopback interface on the configured port.
pub async fn bind(port: u16) -> Result<tokio::net::TcpListener, CliError> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    tokio::net::TcpListener::bind(addr).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::AddrInUse {
            CliError::PortInUse(port)
        } else {
            CliError::Server(format!("cannot bind {addr}: {e}"))
        }
    })
}

/// Serves until Ctrl-C.
pub async fn serve(cfg: &PipelineConfig) -> Result<(), CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.workspace_dir).map_err(|e| {
        CliError::Config(format!("workspace_dir {}: {e}", cfg.workspace_dir.display()))
    })?;
    let listener = bind(cfg.serve_port).await?;
    eprintln!(
        "serving {} on http://{}",
        cfg.workspace_dir.display(),
        listener.local_addr().map_err(|e| CliError::Server(e.to_string()))?
    );
    axum::serve(listener, router(cfg.workspace_dir.clone(), cfg.ui_dir.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Server(e.to_string()))
}
