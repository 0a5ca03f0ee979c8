use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use navimpress::annotate::{AnnotationService, AssignmentPlan};
use navimpress::dataio::export_trace;
use navimpress::dataio::trace::trace_bytes;
use navimpress::features::FeatureSet;
use navimpress::sim::{default_warehouse, run_session, tasks_for, SessionConfig};
use navimpress::{OccupancyGrid, Ratings, Sample};
use navimpress_cli::server::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn session() -> &'static (Vec<Sample>, Arc<OccupancyGrid>) {
    static S: OnceLock<(Vec<Sample>, Arc<OccupancyGrid>)> = OnceLock::new();
    S.get_or_init(|| {
        let map = Arc::new(default_warehouse());
        let tasks = tasks_for(&map).unwrap();
        let cfg = SessionConfig { participants: 1, tasks: 1, seed: 4, ..Default::default() };
        let r = run_session(map.clone(), &tasks, &cfg).unwrap();
        (r.samples.into_iter().take(4).collect(), map)
    })
}

fn truth() -> HashMap<String, Ratings> {
    session().0.iter().map(|s| (s.sample_id.clone(), s.labels)).collect()
}

fn plan(conditions: &[FeatureSet]) -> AssignmentPlan {
    let ids: Vec<String> = session().0.iter().map(|s| s.sample_id.clone()).collect();
    AssignmentPlan::build(&ids, conditions, 1, 2).unwrap()
}

fn app_with(service: AnnotationService) -> Router {
    let (samples, map) = session();
    router(AppState::new(service, samples.clone(), map.clone()))
}

fn app(conditions: &[FeatureSet]) -> Router {
    app_with(AnnotationService::new(plan(conditions), truth()).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, "GET", uri, None).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn record(annotator: &str, sample: &str, condition: &str, r: [u8; 3]) -> Value {
    json!({
        "annotator_id": annotator,
        "sample_id": sample,
        "condition": condition,
        "predictions": { "competence": r[0], "surprise": r[1], "intention": r[2] },
        "elapsed_ms": 1200
    })
}

async fn view_all(app: &Router, annotator: &str) -> Value {
    loop {
        let (_, a) = get_json(app, &format!("/api/assignment?annotator={annotator}")).await;
        if a["form_unlocked"] == json!(true) || a.get("status").is_some() {
            return a;
        }
        let (s, _) = call(app, "GET", a["trace_url"].as_str().unwrap(), None).await;
        assert_eq!(s, StatusCode::OK);
    }
}

#[tokio::test]
async fn three_stage_round_trip() {
    let app = app(&[FeatureSet::NavPlusFacial]);
    let (s, a) = get_json(&app, "/api/assignment?annotator=both-000").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(a["stage"], "nav");
    assert_eq!(a["form_unlocked"], false);
    let sample = a["sample_id"].as_str().unwrap().to_string();

    // Submitting before the stages are watched is refused.
    let (s, _) = call(&app, "POST", "/api/annotation", Some(record("both-000", &sample, "NavPlusFacial", [3, 3, 3]))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    // Skipping ahead does not count.
    call(&app, "GET", &format!("/api/trace/{sample}?view=combined&annotator=both-000"), None).await;
    let (_, a) = get_json(&app, "/api/assignment?annotator=both-000").await;
    assert_eq!(a["stage"], "nav");

    let mut seen = Vec::new();
    for _ in 0..3 {
        let (_, a) = get_json(&app, "/api/assignment?annotator=both-000").await;
        seen.push(a["stage"].as_str().unwrap().to_string());
        call(&app, "GET", a["trace_url"].as_str().unwrap(), None).await;
    }
    assert_eq!(seen, ["nav", "facial", "combined"]);
    let (_, a) = get_json(&app, "/api/assignment?annotator=both-000").await;
    assert_eq!(a["form_unlocked"], true);
    assert_eq!(a["sample_id"], sample.as_str());

    let (s, body) = call(&app, "POST", "/api/annotation", Some(record("both-000", &sample, "NavPlusFacial", [3, 3, 3]))).await;
    assert_eq!(s, StatusCode::OK);
    let stored: Value = serde_json::from_slice(&body).unwrap();
    assert!(stored["submitted_at"].is_u64());

    let (s, _) = call(&app, "POST", "/api/annotation", Some(record("both-000", &sample, "NavPlusFacial", [3, 3, 3]))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (_, a) = get_json(&app, "/api/assignment?annotator=both-000").await;
    assert_ne!(a["sample_id"], sample.as_str());

    let (_, stats) = get_json(&app, "/api/stats").await;
    assert_eq!(stats["total"], 1);
    let both = stats["conditions"].as_array().unwrap().iter().find(|c| c["condition"] == "NavPlusFacial").unwrap();
    assert_eq!(both["n"], 1);
}

#[tokio::test]
async fn single_stage_conditions_and_completion() {
    let app = app(&[FeatureSet::NavOnly]);
    let (_, a) = get_json(&app, "/api/assignment?annotator=nav-000").await;
    assert_eq!(a["stages"], json!(["nav"]));
    for _ in 0..2 {
        let a = view_all(&app, "nav-000").await;
        let sample = a["sample_id"].as_str().unwrap();
        let (s, _) = call(&app, "POST", "/api/annotation", Some(record("nav-000", sample, "NavOnly", [4, 2, 4]))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, a) = get_json(&app, "/api/assignment?annotator=nav-000").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(a, json!({ "status": "complete" }));
}

#[tokio::test]
async fn validation_errors() {
    let app = app(&[FeatureSet::NavOnly]);
    let a = view_all(&app, "nav-000").await;
    let sample = a["sample_id"].as_str().unwrap().to_string();
    let (s, _) = call(&app, "POST", "/api/annotation", Some(record("nav-000", &sample, "NavOnly", [0, 3, 3]))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", "/api/annotation", Some(record("nav-000", &sample, "FacialOnly", [3, 3, 3]))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", "/api/annotation", Some(json!({ "annotator_id": "nav-000" }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "GET", "/api/assignment?annotator=ghost", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", "/api/trace/nope?view=nav", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", &format!("/api/trace/{sample}?view=sideways"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, stats) = get_json(&app, "/api/stats").await;
    assert_eq!(stats["total"], 0);
    assert!(stats["conditions"].as_array().unwrap().iter().all(|c| c["multiclass"].is_null()));
}

#[tokio::test]
async fn served_trace_matches_export() {
    let app = app(&[FeatureSet::NavOnly]);
    let (samples, map) = session();
    let expected = trace_bytes(&export_trace(&samples[1], map).unwrap()).unwrap();
    for view in ["nav", "facial", "combined"] {
        let (s, body) = call(&app, "GET", &format!("/api/trace/{}?view={view}", samples[1].sample_id), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(body, expected);
    }
}

#[tokio::test]
async fn log_replay_restores_state() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("annotations.log");
    let p = plan(&[FeatureSet::NavOnly]);
    let first = {
        let app = app_with(AnnotationService::open(p.clone(), truth(), &log).unwrap());
        let a = view_all(&app, "nav-000").await;
        let sample = a["sample_id"].as_str().unwrap().to_string();
        let (s, _) = call(&app, "POST", "/api/annotation", Some(record("nav-000", &sample, "NavOnly", [5, 1, 5]))).await;
        assert_eq!(s, StatusCode::OK);
        sample
    };
    let app = app_with(AnnotationService::open(p, truth(), &log).unwrap());
    let (_, stats) = get_json(&app, "/api/stats").await;
    assert_eq!(stats["total"], 1);
    let (_, a) = get_json(&app, "/api/assignment?annotator=nav-000").await;
    assert_ne!(a["sample_id"], first.as_str());
    let (s, _) = call(&app, "POST", "/api/annotation", Some(record("nav-000", &first, "NavOnly", [5, 1, 5]))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn concurrent_annotators() {
    let app = app(&[FeatureSet::NavOnly, FeatureSet::FacialOnly]);
    let annotators: Vec<String> = ["nav-000", "nav-001", "facial-000", "facial-001"].map(String::from).to_vec();
    let mut handles = Vec::new();
    for who in annotators {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let mut n = 0;
            loop {
                let a = view_all(&app, &who).await;
                if a.get("status").is_some() {
                    return n;
                }
                let cond = a["condition"].as_str().unwrap().to_string();
                let rec = record(&who, a["sample_id"].as_str().unwrap(), &cond, [3, 3, 3]);
                let (s, _) = call(&app, "POST", "/api/annotation", Some(rec)).await;
                assert_eq!(s, StatusCode::OK);
                n += 1;
            }
        }));
    }
    let mut total = 0;
    for h in handles {
        total += h.await.unwrap();
    }
    assert_eq!(total, 8);
    let (_, stats) = get_json(&app, "/api/stats").await;
    assert_eq!(stats["total"], 8);
    assert_eq!(stats["expected"], 8);
}
