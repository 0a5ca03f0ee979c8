//! HTTP front end for the annotation service.
//!
//! State changes go through one write lock; reads of assignments, traces
//! and statistics take the read lock.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use navimpress::annotate::{AnnotationRecord, AnnotationService, Stage, SubmitError};
use navimpress::dataio::export_trace;
use navimpress::dataio::trace::trace_bytes;
use navimpress::{OccupancyGrid, Sample};
use serde::Deserialize;
use serde_json::json;

#[derive(Clone)]
pub struct AppState {
    service: Arc<RwLock<AnnotationService>>,
    samples: Arc<HashMap<String, Sample>>,
    map: Arc<OccupancyGrid>,
}

impl AppState {
    pub fn new(service: AnnotationService, samples: Vec<Sample>, map: Arc<OccupancyGrid>) -> Self {
        let samples = samples.into_iter().map(|s| (s.sample_id.clone(), s)).collect();
        AppState { service: Arc::new(RwLock::new(service)), samples: Arc::new(samples), map }
    }

    pub fn service(&self) -> &RwLock<AnnotationService> {
        &self.service
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/assignment", get(assignment))
        .route("/api/trace/{sample_id}", get(trace))
        .route("/api/annotation", post(annotation))
        .route("/api/stats", get(stats))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn poisoned() -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, "service state is unavailable")
}

#[derive(Deserialize)]
struct AssignmentQuery {
    annotator: String,
}

async fn assignment(State(st): State<AppState>, Query(q): Query<AssignmentQuery>) -> Response {
    let Ok(svc) = st.service.read() else { return poisoned() };
    if !svc.is_known(&q.annotator) {
        return error(StatusCode::NOT_FOUND, format!("unknown annotator `{}`", q.annotator));
    }
    match svc.next_assignment(&q.annotator) {
        Ok(a) => Json(a).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Deserialize)]
struct TraceQuery {
    view: Option<String>,
    annotator: Option<String>,
}

/// The trace is identical for every view. With an annotator, fetching a
/// view records that stage as watched.
async fn trace(State(st): State<AppState>, Path(sample_id): Path<String>, Query(q): Query<TraceQuery>) -> Response {
    let Some(sample) = st.samples.get(&sample_id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown sample `{sample_id}`"));
    };
    let stage = match q.view.as_deref().map(str::parse::<Stage>) {
        None => None,
        Some(Ok(s)) => Some(s),
        Some(Err(e)) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    let bytes = match export_trace(sample, &st.map).and_then(|t| trace_bytes(&t)) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    if let (Some(stage), Some(annotator)) = (stage, q.annotator) {
        let Ok(mut svc) = st.service.write() else { return poisoned() };
        svc.mark_viewed(&annotator, &sample_id, stage);
    }
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

async fn annotation(State(st): State<AppState>, body: Bytes) -> Response {
    let record: AnnotationRecord = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    let Ok(mut svc) = st.service.write() else { return poisoned() };
    match svc.submit(record) {
        Ok(stored) => Json(stored).into_response(),
        Err(e @ SubmitError::Duplicate) => error(StatusCode::CONFLICT, e.to_string()),
        Err(e @ SubmitError::Invalid(_)) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Err(e @ SubmitError::Storage(_)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn stats(State(st): State<AppState>) -> Response {
    let Ok(svc) = st.service.read() else { return poisoned() };
    match svc.stats() {
        Ok(s) => Json(s).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}
