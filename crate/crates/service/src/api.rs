use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use ivl_core::amr::io as dsio;
use ivl_core::Axis;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{ApiError, ApiResult};
use crate::session::{BrushOutcome, ConfigPatch, ConfigView, DatasetSummary, PlotStatus, Session};

/// Suggested client back-off while a plot is being computed.
pub const RETRY_AFTER_MS: u64 = 100;

type AppState = Arc<Session>;

pub fn router(session: Arc<Session>, max_upload_bytes: usize) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/dataset", get(get_dataset).post(upload_dataset))
        .route("/dataset/path", post(load_dataset_path))
        .route("/config", get(get_config).patch(update_config))
        .route("/plot", get(get_latest_plot))
        .route("/plot/{version}", get(get_plot))
        .route("/brush", post(brush))
        .route("/slice", get(get_slice))
        .route("/events", get(events))
        .layer(DefaultBodyLimit::max(max_upload_bytes))
        .with_state(session)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker task failed: {e}")))?
}

fn json_body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::Invalid(e.body_text()))
}

async fn get_dataset(State(s): State<AppState>) -> ApiResult<Json<DatasetSummary>> {
    s.summary()
        .map(Json)
        .ok_or_else(|| ApiError::NotFound("no dataset loaded".into()))
}

async fn upload_dataset(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<DatasetSummary>> {
    blocking(move || {
        let ds = dsio::from_bytes(&body)?;
        Ok(s.load(ds))
    })
    .await
    .map(Json)
}

#[derive(Deserialize)]
struct PathRequest {
    path: PathBuf,
}

async fn load_dataset_path(
    State(s): State<AppState>,
    payload: Result<Json<PathRequest>, JsonRejection>,
) -> ApiResult<Json<DatasetSummary>> {
    let req = json_body(payload)?;
    blocking(move || {
        let ds = dsio::load(&req.path).map_err(|e| {
            let err = ApiError::from(e);
            let msg = format!("{}: {err}", req.path.display());
            match err {
                ApiError::NotFound(_) => ApiError::NotFound(msg),
                _ => ApiError::Malformed(msg),
            }
        })?;
        Ok(s.load(ds))
    })
    .await
    .map(Json)
}

async fn get_config(State(s): State<AppState>) -> ApiResult<Json<ConfigView>> {
    s.config().map(Json)
}

#[derive(Serialize)]
struct Accepted {
    version: u64,
}

async fn update_config(
    State(s): State<AppState>,
    payload: Result<Json<ConfigPatch>, JsonRejection>,
) -> ApiResult<Json<Accepted>> {
    let patch = json_body(payload)?;
    let version = s.update(patch)?;
    tracing::debug!(version, "config updated");
    Ok(Json(Accepted { version }))
}

fn plot_response(version: u64, status: PlotStatus) -> Response {
    match status {
        PlotStatus::Ready(body) => ([(header::CONTENT_TYPE, "application/json")], body).into_response(),
        PlotStatus::Failed(msg) => ApiError::Invalid(msg).into_response(),
        PlotStatus::Pending => (
            StatusCode::ACCEPTED,
            [(header::RETRY_AFTER, "1")],
            Json(json!({ "version": version, "status": "pending", "retry_after_ms": RETRY_AFTER_MS })),
        )
            .into_response(),
    }
}

async fn get_plot(State(s): State<AppState>, Path(version): Path<u64>) -> ApiResult<Response> {
    Ok(plot_response(version, s.plot(version)?))
}

/// The newest published plot, or 202 for the current version before any is ready.
async fn get_latest_plot(State(s): State<AppState>) -> ApiResult<Response> {
    let ready = s.latest_ready();
    let version = if ready == 0 { s.current_version() } else { ready };
    match s.plot(version) {
        Ok(status) => Ok(plot_response(version, status)),
        // A newer run finished between the two reads.
        Err(ApiError::NotFound(_)) if ready != 0 => Ok(plot_response(s.latest_ready(), s.plot(s.latest_ready())?)),
        Err(e) => Err(e),
    }
}

#[derive(Deserialize)]
struct BrushRequest {
    /// Inclusive pixel column ranges `[x0, x1]`.
    ranges: Vec<(usize, usize)>,
}

async fn brush(
    State(s): State<AppState>,
    payload: Result<Json<BrushRequest>, JsonRejection>,
) -> ApiResult<Json<BrushOutcome>> {
    let req = json_body(payload)?;
    blocking(move || s.brush(&req.ranges)).await.map(Json)
}

#[derive(Deserialize)]
struct SliceQuery {
    axis: String,
    coord: Option<f64>,
    field: Option<String>,
}

#[derive(Serialize)]
struct SliceResponse {
    version: u64,
    field: String,
    axis: Axis,
    coord: f64,
    width: usize,
    height: usize,
    /// Row-major RGBA bytes, base64.
    rgba: String,
}

async fn get_slice(
    State(s): State<AppState>,
    query: Result<Query<SliceQuery>, QueryRejection>,
) -> ApiResult<Json<SliceResponse>> {
    let Query(q) = query.map_err(|e| ApiError::Invalid(e.body_text()))?;
    let axis: Axis = q.axis.parse()?;
    blocking(move || {
        let (version, field, img) = s.slice(axis, q.coord, q.field.as_deref())?;
        Ok(SliceResponse {
            version,
            field,
            axis,
            coord: img.coord,
            width: img.width,
            height: img.height,
            rgba: img.rgba_base64(),
        })
    })
    .await
    .map(Json)
}

/// `version_ready` events, newest version first on connect, then one per
/// published version. Intermediate versions may be skipped; order is
/// strictly increasing.
async fn events(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let mut rx = s.subscribe();
    rx.mark_changed();
    let stream = futures::stream::unfold((rx, 0u64), |(mut rx, last)| async move {
        loop {
            rx.changed().await.ok()?;
            let v = *rx.borrow_and_update();
            if v > last {
                let event = Event::default()
                    .event("version_ready")
                    .data(json!({ "version": v }).to_string());
                return Some((Ok(event), (rx, v)));
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
}
