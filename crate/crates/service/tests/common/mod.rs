#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use shuttle_core::ingestion::{generate_synthetic, SyntheticSpec};
use shuttle_service::{router, AppState, Config};
use tempfile::TempDir;
use tower::ServiceExt;

pub const SEED: u64 = 11;

/// Writes the default synthetic dataset to `dir/<name>`.
pub fn write_dataset(dir: &Path, name: &str, spec: &SyntheticSpec, seed: u64) {
    generate_synthetic(spec, seed).unwrap().write_to_dir(&dir.join(name)).unwrap();
}

pub struct Harness {
    pub dir: TempDir,
    pub app: Router,
    pub state: Arc<AppState>,
}

impl Harness {
    pub fn new(spec: &SyntheticSpec) -> Self {
        let dir = TempDir::new().unwrap();
        write_dataset(dir.path(), "data", spec, SEED);
        let (app, state) = app_for(dir.path(), None);
        Self { dir, app, state }
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, HeaderMap, Value) {
        call(&self.app, method, uri, body, None).await
    }
}

pub fn app_for(data_dir: &Path, log_dir: Option<&Path>) -> (Router, Arc<AppState>) {
    let mut config = Config::new(data_dir);
    config.session_log_dir = log_dir.map(Path::to_path_buf);
    let state = AppState::new(config).unwrap();
    (router(state.clone()), state)
}

pub async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
    if_match: Option<&str>,
) -> (StatusCode, HeaderMap, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(m) = if_match {
        req = req.header("if-match", m);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| json!(String::from_utf8_lossy(&bytes)))
    };
    (status, headers, value)
}

pub async fn create(app: &Router) -> String {
    let (status, _, body) = call(app, Method::POST, "/sessions", Some(json!({"dataset": "data"})), None).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

pub async fn call_bytes(app: &Router, uri: &str) -> Vec<u8> {
    let req = Request::builder().method(Method::GET).uri(uri).body(Body::empty()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK, "{uri}");
    res.into_body().collect().await.unwrap().to_bytes().to_vec()
}
