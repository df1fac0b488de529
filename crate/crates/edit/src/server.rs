//! HTTP JSON API over review sessions.
//!
//! Each session sits behind its own lock: mutations take it exclusively and
//! are checkpointed before the response is sent, reads share it. Sessions
//! never lock each other.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::Deserialize;
use serde_json::{json, Value};

use roadtrace_core::graph::RoadGraph;
use roadtrace_core::graph_io::{edge_feature, read_graph, to_geojson, write_graph};

use crate::prune::PruneParams;
use crate::session::{now, Action, Decision, OverlaySegment, Outcome, Session};
use crate::store::Store;
use crate::EditError;

pub struct AppState {
    sessions: RwLock<BTreeMap<String, Arc<RwLock<Session>>>>,
    store: Option<Store>,
    merge_radius: f64,
    next_id: AtomicU64,
}

fn parse_ordinal(id: &str) -> Option<u64> {
    id.strip_prefix('s')?.parse().ok()
}

impl AppState {
    /// Service state, resuming every session checkpointed under `data_dir`.
    pub fn new(merge_radius: f64, data_dir: Option<PathBuf>) -> Result<AppState, EditError> {
        if !(merge_radius.is_finite() && merge_radius > 0.0) {
            return Err(EditError::InvalidConfig("merge_radius must be positive".into()));
        }
        let store = data_dir.map(Store::open).transpose()?;
        let mut sessions = BTreeMap::new();
        let mut next = 1;
        if let Some(store) = &store {
            for s in store.load_all()? {
                next = next.max(parse_ordinal(s.id()).map_or(0, |n| n + 1));
                log::info!("resumed session {} ({} actions)", s.id(), s.log().len());
                sessions.insert(s.id().to_string(), Arc::new(RwLock::new(s)));
            }
        }
        Ok(AppState {
            sessions: RwLock::new(sessions),
            store,
            merge_radius,
            next_id: AtomicU64::new(next),
        })
    }

    pub fn create_session(&self, base: RoadGraph, inferred: RoadGraph) -> Result<String, EditError> {
        let id = format!("s{:06}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let s = Session::new(id.clone(), base, inferred, self.merge_radius)?;
        if let Some(store) = &self.store {
            store.create(&s)?;
        }
        self.sessions.write().insert(id.clone(), Arc::new(RwLock::new(s)));
        Ok(id)
    }

    pub fn session(&self, id: &str) -> Result<Arc<RwLock<Session>>, EditError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| EditError::UnknownSession(id.to_string()))
    }

    /// Applies `action` under the session's exclusive lock and checkpoints it.
    pub fn mutate(&self, id: &str, action: Action) -> Result<Outcome, EditError> {
        let s = self.session(id)?;
        let mut s = s.write();
        let outcome = s.apply(action, now())?;
        if let Some(store) = &self.store {
            store.append(id, s.log().last().unwrap())?;
        }
        Ok(outcome)
    }
}

struct ApiError(EditError);

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            EditError::UnknownSession(_) | EditError::UnknownSegment(_) => StatusCode::NOT_FOUND,
            EditError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type AppRef = State<Arc<AppState>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    base_graph_path: PathBuf,
    inferred_graph_path: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatusRequest {
    action: Decision,
}

fn load_graph(path: &Path) -> Result<RoadGraph, EditError> {
    let input = |msg: String| EditError::Input {
        path: path.to_path_buf(),
        msg,
    };
    let text = fs::read_to_string(path).map_err(|e| input(e.to_string()))?;
    read_graph(&text).map_err(|e| input(e.to_string()))
}

fn segment_feature(s: &Session, seg: &OverlaySegment) -> Value {
    edge_feature(
        s.inferred(),
        seg.edge.a,
        seg.edge.b,
        json!({
            "segment_id": seg.id,
            "status": seg.status.as_str(),
            "support": seg.support,
        }),
    )
}

async fn healthz() -> &'static str {
    "ok"
}

async fn create(State(app): AppRef, Json(req): Json<CreateRequest>) -> ApiResult<Json<Value>> {
    let base = load_graph(&req.base_graph_path)?;
    let inferred = load_graph(&req.inferred_graph_path)?;
    let id = app.create_session(base, inferred)?;
    let s = app.session(&id)?;
    let overlay_size = s.read().overlay().len();
    Ok(Json(json!({ "session_id": id, "overlay_size": overlay_size })))
}

async fn overlay(State(app): AppRef, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let s = s.read();
    let features: Vec<Value> = s.overlay().iter().map(|seg| segment_feature(&s, seg)).collect();
    Ok(Json(json!({ "type": "FeatureCollection", "features": features })))
}

async fn base(State(app): AppRef, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let geojson = to_geojson(s.read().base());
    Ok(Json(geojson))
}

async fn set_status(
    State(app): AppRef,
    UrlPath((id, seg)): UrlPath<(String, u32)>,
    Json(req): Json<StatusRequest>,
) -> ApiResult<Json<Value>> {
    let segment = crate::SegmentId(seg);
    let action = match req.action {
        Decision::Accept => Action::Accept { segment },
        Decision::Reject => Action::Reject { segment },
    };
    let Outcome::Segment(updated) = app.mutate(&id, action)? else {
        unreachable!("status actions yield a segment")
    };
    let s = app.session(&id)?;
    let feature = segment_feature(&s.read(), &updated);
    Ok(Json(feature))
}

async fn prune(State(app): AppRef, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let params: PruneParams = if body.iter().all(u8::is_ascii_whitespace) {
        PruneParams::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| EditError::InvalidConfig(e.to_string()))?
    };
    let Outcome::Pruned(ids) = app.mutate(&id, Action::Prune { params })? else {
        unreachable!("prune yields pruned ids")
    };
    Ok(Json(json!({ "rejected_ids": ids })))
}

async fn teleport(State(app): AppRef, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let Outcome::Teleport(view) = app.mutate(&id, Action::Teleport)? else {
        unreachable!("teleport yields a view")
    };
    Ok(Json(match view {
        Some(v) => serde_json::to_value(v).unwrap(),
        None => json!({ "empty": true }),
    }))
}

async fn export(State(app): AppRef, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let s = app.session(&id)?;
    let text = write_graph(&s.read().export());
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}/overlay", get(overlay))
        .route("/sessions/{id}/base", get(base))
        .route("/sessions/{id}/segments/{seg}/status", post(set_status))
        .route("/sessions/{id}/prune", post(prune))
        .route("/sessions/{id}/teleport", post(teleport))
        .route("/sessions/{id}/export", get(export))
        .with_state(app)
}

/// Serves the API on `listener` until the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, app: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(app)).await
}
