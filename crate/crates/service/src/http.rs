//! JSON-over-HTTP routes.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use shuttle_core::route::DEFAULT_BIN_MIN;

use crate::dataset::DatasetRef;
use crate::error::ApiError;
use crate::session::{ApiResult, Event, Session};
use crate::AppState;

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(summary))
        .route("/sessions/:id/silhouette", get(silhouette))
        .route("/sessions/:id/k", put(set_k))
        .route("/sessions/:id/directions", get(directions))
        .route("/sessions/:id/regions", post(build_regions).get(regions))
        .route("/sessions/:id/directions/:d/stops", get(stops))
        .route("/sessions/:id/directions/:d/override", put(set_override))
        .route("/sessions/:id/directions/:d/histogram", get(histogram))
        .route("/sessions/:id/directions/:d/candidates", post(add_candidate).get(candidates))
        .route("/sessions/:id/directions/:d/candidates/:label", delete(remove_candidate))
        .route("/sessions/:id/directions/:d/compare", get(compare))
        .route("/sessions/:id/directions/:d/diff", post(diff))
        .route("/sessions/:id/export", get(export))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("ascii")
}

fn with_revision(status: StatusCode, revision: u64, body: Value) -> Response {
    let mut r = (status, Json(body)).into_response();
    r.headers_mut().insert(header::ETAG, etag(revision));
    r
}

/// Parses `If-Match`; a missing header or `*` accepts any revision.
fn expected_revision(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let s = v.to_str().map_err(|_| ApiError::bad_request("If-Match is not text"))?.trim();
    if s == "*" {
        return Ok(None);
    }
    let s = s.strip_prefix("W/").unwrap_or(s).trim_matches('"');
    s.parse()
        .map(Some)
        .map_err(|_| ApiError::bad_request(format!("If-Match {s:?} is not a revision")))
}

/// Runs a read-only operation against the session.
async fn read<F>(state: Shared, id: String, f: F) -> ApiResult<Response>
where
    F: FnOnce(&Session) -> ApiResult<Value> + Send + 'static,
{
    let handle = state.session(&id)?;
    blocking(move || {
        let s = handle.lock().unwrap();
        let body = f(&s)?;
        Ok(with_revision(StatusCode::OK, s.revision, body))
    })
    .await
}

/// Applies and logs one event, honoring `If-Match`.
async fn mutate(state: Shared, id: String, headers: HeaderMap, event: Event) -> ApiResult<Response> {
    let expected = expected_revision(&headers)?;
    let handle = state.session(&id)?;
    blocking(move || {
        let mut s = handle.lock().unwrap();
        if let Some(rev) = expected {
            if rev != s.revision {
                return Err(ApiError::conflict(
                    "revision_mismatch",
                    format!("session is at revision {}, not {rev}", s.revision),
                ));
            }
        }
        let result = s.apply(&event)?;
        if let Err(e) = state.record(&s.id, &event) {
            tracing::error!(session = %s.id, error = %e, "event not logged");
        }
        let status = match event {
            Event::AddCandidate { .. } => StatusCode::CREATED,
            _ => StatusCode::OK,
        };
        Ok(with_revision(status, s.revision, json!({"revision": s.revision, "result": result})))
    })
    .await
}

async fn create_session(State(state): State<Shared>, Json(r): Json<DatasetRef>) -> ApiResult<Response> {
    blocking(move || {
        let handle = state.create_session(r)?;
        let s = handle.lock().unwrap();
        Ok(with_revision(StatusCode::CREATED, s.revision, s.summary()))
    })
    .await
}

async fn summary(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    read(state, id, |s| Ok(s.summary())).await
}

#[derive(Deserialize)]
struct SilhouetteQuery {
    kmin: Option<usize>,
    kmax: Option<usize>,
    seed: Option<u64>,
}

async fn silhouette(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<SilhouetteQuery>,
) -> ApiResult<Response> {
    let (kmin, kmax) = (q.kmin.unwrap_or(2), q.kmax.unwrap_or(12));
    if kmin < 2 || kmax < kmin {
        return Err(ApiError::unprocessable("invalid_input", "need 2 <= kmin <= kmax"));
    }
    read(state, id, move |s| s.silhouette(kmin, kmax, q.seed.unwrap_or(0))).await
}

#[derive(Deserialize)]
struct SetK {
    k: usize,
    #[serde(default)]
    seed: u64,
}

async fn set_k(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(b): Json<SetK>,
) -> ApiResult<Response> {
    mutate(state, id, headers, Event::SetK { k: b.k, seed: b.seed }).await
}

async fn directions(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    read(state, id, |s| s.clustering_view()).await
}

#[derive(Deserialize, Default)]
struct BuildRegions {
    threshold_m: Option<f64>,
}

async fn build_regions(
    State(state): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Option<Json<BuildRegions>>,
) -> ApiResult<Response> {
    let threshold_m = body
        .and_then(|Json(b)| b.threshold_m)
        .unwrap_or(state.config.threshold_default_m);
    mutate(state, id, headers, Event::BuildRegions { threshold_m }).await
}

async fn regions(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    read(state, id, |s| s.regions_view()).await
}

#[derive(Deserialize)]
struct StopsQuery {
    metric: Option<String>,
}

async fn stops(
    State(state): State<Shared>,
    Path((id, d)): Path<(String, usize)>,
    Query(q): Query<StopsQuery>,
) -> ApiResult<Response> {
    let metric = q.metric.unwrap_or_else(|| "avg_dist".into());
    read(state, id, move |s| s.stops(d, &metric)).await
}

#[derive(Deserialize)]
struct Override {
    region_id: usize,
    spot_id: usize,
}

async fn set_override(
    State(state): State<Shared>,
    Path((id, d)): Path<(String, usize)>,
    headers: HeaderMap,
    Json(b): Json<Override>,
) -> ApiResult<Response> {
    let event = Event::Override { direction_id: d, region_id: b.region_id, spot_id: b.spot_id };
    mutate(state, id, headers, event).await
}

#[derive(Deserialize)]
struct HistogramQuery {
    bin: Option<u32>,
}

async fn histogram(
    State(state): State<Shared>,
    Path((id, d)): Path<(String, usize)>,
    Query(q): Query<HistogramQuery>,
) -> ApiResult<Response> {
    let bin = q.bin.unwrap_or(DEFAULT_BIN_MIN);
    read(state, id, move |s| s.histogram(d, bin)).await
}

#[derive(Deserialize)]
struct AddCandidate {
    departure_time: String,
    label: Option<String>,
}

async fn add_candidate(
    State(state): State<Shared>,
    Path((id, d)): Path<(String, usize)>,
    headers: HeaderMap,
    Json(b): Json<AddCandidate>,
) -> ApiResult<Response> {
    let event = Event::AddCandidate { direction_id: d, departure_time: b.departure_time, label: b.label };
    mutate(state, id, headers, event).await
}

async fn remove_candidate(
    State(state): State<Shared>,
    Path((id, d, label)): Path<(String, usize, String)>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    mutate(state, id, headers, Event::RemoveCandidate { direction_id: d, label }).await
}

async fn candidates(State(state): State<Shared>, Path((id, d)): Path<(String, usize)>) -> ApiResult<Response> {
    read(state, id, move |s| s.candidates(d)).await
}

async fn compare(State(state): State<Shared>, Path((id, d)): Path<(String, usize)>) -> ApiResult<Response> {
    read(state, id, move |s| s.compare(d)).await
}

#[derive(Deserialize)]
struct DiffQuery {
    label: Option<String>,
}

/// The body is either `{"reference": <geojson>}` or the GeoJSON itself.
async fn diff(
    State(state): State<Shared>,
    Path((id, d)): Path<(String, usize)>,
    Query(q): Query<DiffQuery>,
    Json(body): Json<Value>,
) -> ApiResult<Response> {
    let reference = match body {
        Value::Object(mut m) if m.contains_key("reference") => m.remove("reference").unwrap_or(Value::Null),
        other => other,
    };
    read(state, id, move |s| s.diff(d, &reference, q.label.as_deref())).await
}

/// Also snapshots the bundle next to the session's event log.
async fn export(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let handle = state.session(&id)?;
    blocking(move || {
        let s = handle.lock().unwrap();
        let bundle = s.export()?;
        state.snapshot(&s.id, &serde_json::to_vec_pretty(&bundle).expect("json value"));
        Ok(with_revision(StatusCode::OK, s.revision, bundle))
    })
    .await
}
