use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pdt_core::optimizer::{noise_for, synthetic_measurements, truth_for};
use pdt_core::scenario::{Scenario, BUNDLED_SCENARIO};
use pdt_core::session::replay;
use pdt_core::SessionLog;
use pdt_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(AppState::new())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = call_text(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

async fn call_text(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn create(app: &Router, seed: u64) -> String {
    let (st, v) = call(app, "POST", "/sessions", Some(json!({ "seed": seed, "n_particles": 120 }))).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

fn site(seed: u64, k: usize) -> Vec<(u32, f64)> {
    let p = Scenario::bundled().problem::<f64>().unwrap();
    let truth = truth_for(&p.priors, seed, k).unwrap();
    synthetic_measurements(&p.model, &truth, 1.09, 0.05, &noise_for(seed, k, 72))
        .unwrap()
        .into_iter()
        .map(|z| (z.t, z.z_s))
        .collect()
}

/// Feeds measurements until a decision is pending with an `adjust` recommendation.
async fn pending(app: &Router) -> (String, Value) {
    for k in 0..50 {
        let id = create(app, 3).await;
        for (t, z) in site(901, k) {
            let (st, v) = call(app, "POST", &format!("/sessions/{id}/measurements"), Some(json!({ "t_week": t, "z_s_m": z }))).await;
            assert_eq!(st, StatusCode::OK, "{v}");
            if v["status"] == "decision-pending" {
                if v["recommendation"]["action"]["action"] == "adjust" {
                    return (id, v);
                }
                break;
            }
        }
    }
    panic!("no adjust recommendation");
}

#[tokio::test]
async fn create_returns_prior_summary() {
    let app = app();
    let (st, v) = call(&app, "POST", "/sessions", Some(json!({ "seed": 7 }))).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(v["scenario_hash"], Scenario::bundled().hash());
    assert_eq!(v["event_index"], 1);
    assert_eq!(v["status"], "measuring");
    assert_eq!(v["summary"]["n_particles"], 100);
    assert_eq!(v["summary"]["settlement_fan_m"].as_array().unwrap().len(), 73);
    assert!(v["summary"]["settlement_t_max_m"]["q975"].as_f64() > v["summary"]["settlement_t_max_m"]["q025"].as_f64());
}

#[tokio::test]
async fn same_seed_gives_distinct_ids_and_identical_priors() {
    let app = app();
    let (_, a) = call(&app, "POST", "/sessions", Some(json!({ "seed": 5 }))).await;
    let (_, b) = call(&app, "POST", "/sessions", Some(json!({ "seed": 5 }))).await;
    assert_ne!(a["session_id"], b["session_id"]);
    assert_eq!(a["summary"], b["summary"]);
}

#[tokio::test]
async fn malformed_priors_are_rejected_with_a_path() {
    let app = app();
    let bad = BUNDLED_SCENARIO.replacen("samples = [392.5,", "samples = [\"soft\",", 1);
    let (st, v) = call(&app, "POST", "/sessions", Some(json!({ "seed": 1, "scenario": bad }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["path"].as_str().unwrap().starts_with("priors.sigma_L"), "{v}");

    let (st, v) = call(&app, "POST", "/sessions", Some(json!({ "seed": 1, "overrides": ["priors.cv.cov=-0.5"] }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({ "seed": "one" }))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn measurement_errors_map_to_status_codes() {
    let app = app();
    let id = create(&app, 2).await;
    let uri = format!("/sessions/{id}/measurements");
    let (st, v) = call(&app, "POST", &uri, Some(json!({ "t_week": 4, "z_s_m": 0.1 }))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["event_index"], 3);
    assert_eq!(v["summary"]["t_week"], 4);
    let (st, v) = call(&app, "POST", &uri, Some(json!({ "t_week": 4, "z_s_m": 0.1 }))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"], "out-of-order");
    let (st, _) = call(&app, "POST", &uri, Some(json!({ "t_week": 5, "z_s_m": 0.1, "expected_event_index": 1 }))).await;
    assert_eq!(st, StatusCode::CONFLICT);

    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/close"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["final"]["event"], "final");
    let (st, _) = call(&app, "POST", &uri, Some(json!({ "t_week": 9, "z_s_m": 0.2 }))).await;
    assert_eq!(st, StatusCode::GONE);
    let (st, _) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn tail_measurement_warns_but_succeeds() {
    let app = app();
    let id = create(&app, 2).await;
    let (_, prior) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let hi = prior["summary"]["settlement_fan_m"][10]["q975_m"].as_f64().unwrap();
    let lo = prior["summary"]["settlement_fan_m"][10]["q025_m"].as_f64().unwrap();
    // well beyond the widest particle, still inside the representable likelihood
    let z = hi + (hi - lo) + 20.0 * 0.05;
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/measurements"), Some(json!({ "t_week": 10, "z_s_m": z }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert!(v["warning"].as_str().unwrap().contains("degenerate"));
}

#[tokio::test]
async fn whatif_needs_a_pending_decision() {
    let app = app();
    let id = create(&app, 2).await;
    let (st, v) = call(&app, "GET", &format!("/sessions/{id}/whatif?h_add=0.5"), None).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"], "wrong-status");
    let (st, v) = call(&app, "GET", &format!("/sessions/{id}/recommendation"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["recommendation"]["action"]["action"], "keep-measuring");
}

#[tokio::test]
async fn whatif_sweep_matches_recommendation() {
    let app = app();
    let (id, out) = pending(&app).await;
    let rec = &out["recommendation"];
    let (_, zero) = call(&app, "GET", &format!("/sessions/{id}/whatif?h_add=0"), None).await;
    assert_eq!(zero["prob_below_target"], out["summary"]["prob_below_target"]);
    assert_eq!(zero["settlement_t_max_m"], out["summary"]["settlement_t_max_m"]);
    let mut last = 1.0;
    let mut minimal = None;
    for i in 1..=30 {
        let h = i as f64 / 10.0;
        let (st, w) = call(&app, "GET", &format!("/sessions/{id}/whatif?h_add={h}"), None).await;
        assert_eq!(st, StatusCode::OK);
        let p = w["prob_below_target"].as_f64().unwrap();
        assert!(p <= last);
        last = p;
        if minimal.is_none() && p <= 0.43 {
            minimal = Some(h);
        }
    }
    if rec["grid_exhausted"] == false {
        assert_eq!(minimal, rec["action"]["h_add"].as_f64());
    }
    let (st, fast) = call(&app, "GET", &format!("/sessions/{id}/whatif?h_add=1.0&fast=true"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(fast["n_particles"], 100);
}

#[tokio::test]
async fn reads_leave_the_session_untouched() {
    let app = app();
    let (id, _) = pending(&app).await;
    let (_, before) = call_text(&app, "GET", &format!("/sessions/{id}/log"), None).await;
    for uri in ["", "/recommendation", "/whatif?h_add=0.8", "/whatif?h_add=0.8&fast=true", "/log"] {
        let (st, _) = call_text(&app, "GET", &format!("/sessions/{id}{uri}"), None).await;
        assert_eq!(st, StatusCode::OK);
    }
    let (_, after) = call_text(&app, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn actions_follow_the_single_increment_rule() {
    let app = app();
    let (id, out) = pending(&app).await;
    let idx = out["event_index"].as_u64().unwrap();
    let uri = format!("/sessions/{id}/actions");
    let (st, _) = call(&app, "POST", &uri, Some(json!({ "h_add_m": 0.5, "expected_event_index": idx - 1 }))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let h = out["recommendation"]["action"]["h_add"].as_f64().unwrap();
    let (st, v) = call(&app, "POST", &uri, Some(json!({ "h_add_m": h, "expected_event_index": idx }))).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "adjusted");
    assert_eq!(v["overridden"], false);
    assert_eq!(v["summary"]["h_add_m"], h);
    let (st, v) = call(&app, "POST", &uri, Some(json!({ "h_add_m": 0.2 }))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"], "unsupported-action");
}

#[tokio::test]
async fn zero_override_returns_to_measuring() {
    let app = app();
    let (id, _) = pending(&app).await;
    let (st, v) = call(&app, "POST", &format!("/sessions/{id}/actions"), Some(json!({ "h_add_m": 0.0 }))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["status"], "measuring");
    assert_eq!(v["overridden"], true);
}

#[tokio::test]
async fn served_log_replays_offline() {
    let app = app();
    let (id, out) = pending(&app).await;
    let h = out["recommendation"]["action"]["h_add"].as_f64().unwrap();
    call(&app, "POST", &format!("/sessions/{id}/actions"), Some(json!({ "h_add_m": h }))).await;
    call(&app, "POST", &format!("/sessions/{id}/close"), None).await;
    let (st, text) = call_text(&app, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(st, StatusCode::OK);
    let log = SessionLog::from_jsonl(&text).unwrap();
    let s = replay(&log, &Scenario::bundled()).unwrap();
    assert_eq!(s.log().to_jsonl(), text);
}

#[tokio::test]
async fn sessions_are_independent_under_concurrency() {
    let app = app();
    let ids = create_concurrently(&app).await;
    let mut unique = ids.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), ids.len());
}

async fn create_concurrently(app: &Router) -> Vec<String> {
    let mut handles = Vec::new();
    for seed in 0..8u64 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let id = create(&app, seed).await;
            let (st, _) = call(&app, "POST", &format!("/sessions/{id}/measurements"), Some(json!({ "t_week": 3, "z_s_m": 0.05 }))).await;
            assert_eq!(st, StatusCode::OK);
            id
        }));
    }
    let mut ids = Vec::new();
    for h in handles {
        ids.push(h.await.unwrap());
    }
    ids
}

#[tokio::test]
async fn openapi_document_is_served() {
    let (st, v) = call(&app(), "GET", "/openapi.json", None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(v["paths"]["/sessions/{id}/whatif"].is_object());
}
