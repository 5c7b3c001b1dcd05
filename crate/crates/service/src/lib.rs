//! HTTP/JSON session API over [`TwinSession`].
//!
//! Each session sits behind its own lock: measurements, actions and close take it exclusively,
//! reads share it. Engine work runs on the blocking pool. Every JSON response names the
//! session, its scenario hash and the index of its latest log event.

mod error;

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pdt_core::policy::BuDecision;
use pdt_core::scenario::{Scenario, BUNDLED_NAME};
use pdt_core::session::{BeliefSummary, MeasurementOutcome, SessionEvent, SessionStatus, WhatIf};
use pdt_core::{HeuristicParams, TwinSession};
use serde::{Deserialize, Serialize};

pub use error::ApiError;

pub const DEFAULT_PORT: u16 = 8073;

/// Loopback address the service binds to unless told otherwise.
pub fn default_addr() -> SocketAddr {
    SocketAddr::from((Ipv4Addr::LOCALHOST, DEFAULT_PORT))
}

/// OpenAPI description of the endpoints, also served at `/openapi.json`.
pub const OPENAPI: &str = include_str!("../../../docs/openapi.json");

type Shared = Arc<RwLock<TwinSession>>;

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Shared>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .map_err(|_| ApiError::internal("session table poisoned"))?
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn insert(&self, session: TwinSession) -> Result<String, ApiError> {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("s{n:06}");
        self.sessions
            .write()
            .map_err(|_| ApiError::internal("session table poisoned"))?
            .insert(id.clone(), Arc::new(RwLock::new(session)));
        Ok(id)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/measurements", post(post_measurement))
        .route("/sessions/{id}/whatif", get(get_whatif))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/recommendation", get(get_recommendation))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/close", post(post_close))
        .route("/openapi.json", get(openapi))
        .with_state(state)
}

/// Router plus a static file route for a built dashboard bundle.
pub fn router_with_static(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let r = router(state);
    match static_dir {
        Some(dir) => r.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => r,
    }
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicInput {
    pub h0_m: f64,
    pub cov_th: f64,
    pub p_th: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Bundled scenario name or a full scenario TOML document. Defaults to the bundled one.
    #[serde(default)]
    pub scenario: Option<String>,
    /// Dotted `path=value` overrides applied to the scenario.
    #[serde(default)]
    pub overrides: Vec<String>,
    pub seed: u64,
    /// Defaults to the scenario's `policy.heuristic`.
    #[serde(default)]
    pub heuristic: Option<HeuristicInput>,
    #[serde(default)]
    pub n_particles: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementInput {
    #[serde(alias = "t")]
    pub t_week: u32,
    #[serde(alias = "z_s")]
    pub z_s_m: f64,
    /// Optimistic concurrency token: the event index the client last saw.
    #[serde(default)]
    pub expected_event_index: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionInput {
    #[serde(alias = "h_add")]
    pub h_add_m: f64,
    #[serde(default)]
    pub expected_event_index: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct WhatIfQuery {
    #[serde(alias = "h_add_m")]
    pub h_add: f64,
    #[serde(default)]
    pub fast: bool,
}

/// Common response header fields.
#[derive(Debug, Serialize)]
struct Envelope<T: Serialize> {
    session_id: String,
    scenario_hash: String,
    event_index: usize,
    status: SessionStatus,
    #[serde(flatten)]
    body: T,
}

fn envelope<T: Serialize>(id: &str, s: &TwinSession, body: T) -> Envelope<T> {
    Envelope {
        session_id: id.to_string(),
        scenario_hash: s.scenario_hash().to_string(),
        event_index: s.event_index(),
        status: s.status(),
        body,
    }
}

#[derive(Debug, Serialize)]
struct SessionView {
    seed: u64,
    heuristic: HeuristicParams,
    sigma_eps_m: f64,
    summary: BeliefSummary,
}

#[derive(Debug, Serialize)]
struct ActionView {
    recommendation: BuDecision,
    committed_h_add_m: f64,
    overridden: bool,
    summary: BeliefSummary,
}

#[derive(Debug, Serialize)]
struct RecommendationView {
    recommendation: BuDecision,
}

#[derive(Debug, Serialize)]
struct CloseView {
    #[serde(rename = "final")]
    final_event: SessionEvent,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn read(s: &Shared) -> Result<std::sync::RwLockReadGuard<'_, TwinSession>, ApiError> {
    s.read().map_err(|_| ApiError::internal("session lock poisoned"))
}

fn write(s: &Shared) -> Result<std::sync::RwLockWriteGuard<'_, TwinSession>, ApiError> {
    s.write().map_err(|_| ApiError::internal("session lock poisoned"))
}

fn check_token(s: &TwinSession, expected: Option<usize>) -> Result<(), ApiError> {
    match expected {
        Some(e) if e != s.event_index() => Err(ApiError::stale(e, s.event_index())),
        _ => Ok(()),
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::invalid_body(e.body_text()))
}

fn session_seed(s: &TwinSession) -> u64 {
    match s.log().events().first() {
        Some(SessionEvent::Init { seed, .. }) => *seed,
        _ => 0,
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    blocking(move || {
        let text = match req.scenario.as_deref() {
            None => pdt_core::scenario::BUNDLED_SCENARIO,
            Some(name) if name == BUNDLED_NAME => pdt_core::scenario::BUNDLED_SCENARIO,
            Some(text) => text,
        };
        let sc = Scenario::from_toml_str(text, &req.overrides)?;
        let w = match req.heuristic {
            Some(h) => HeuristicParams::new(h.h0_m, h.cov_th, h.p_th)?,
            None => sc.heuristic()?,
        };
        let session = TwinSession::new(&sc, req.seed, w, req.n_particles)?;
        let view = SessionView {
            seed: req.seed,
            heuristic: w,
            sigma_eps_m: session.sigma_eps(),
            summary: session.summary()?,
        };
        let id = state.insert(session.clone())?;
        log::info!("created session {id} (seed {}, scenario {})", req.seed, session.scenario_hash());
        Ok((StatusCode::CREATED, Json(envelope(&id, &session, view))).into_response())
    })
    .await
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let shared = state.get(&id)?;
    blocking(move || {
        let s = read(&shared)?;
        let view = SessionView {
            seed: session_seed(&s),
            heuristic: *s.heuristic(),
            sigma_eps_m: s.sigma_eps(),
            summary: s.summary()?,
        };
        Ok(Json(envelope(&id, &s, view)).into_response())
    })
    .await
}

async fn post_measurement(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<MeasurementInput>, JsonRejection>,
) -> Result<Response, ApiError> {
    let m = body(payload)?;
    let shared = state.get(&id)?;
    blocking(move || {
        let mut s = write(&shared)?;
        check_token(&s, m.expected_event_index)?;
        let out: MeasurementOutcome = s.measure(m.t_week, m.z_s_m)?;
        Ok(Json(envelope(&id, &s, out)).into_response())
    })
    .await
}

async fn get_whatif(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<WhatIfQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::invalid_body(e.body_text()))?;
    let shared = state.get(&id)?;
    blocking(move || {
        let s = read(&shared)?;
        let w: WhatIf = s.whatif(q.h_add, q.fast)?;
        Ok(Json(envelope(&id, &s, w)).into_response())
    })
    .await
}

async fn post_action(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<ActionInput>, JsonRejection>,
) -> Result<Response, ApiError> {
    let a = body(payload)?;
    let shared = state.get(&id)?;
    blocking(move || {
        let mut s = write(&shared)?;
        check_token(&s, a.expected_event_index)?;
        let rec = s.commit(a.h_add_m)?;
        let overridden = match s.log().events().iter().rev().find(|e| matches!(e, SessionEvent::Decision { .. })) {
            Some(SessionEvent::Decision { overridden, .. }) => *overridden,
            _ => false,
        };
        let view = ActionView {
            recommendation: rec,
            committed_h_add_m: a.h_add_m,
            overridden,
            summary: s.summary()?,
        };
        Ok(Json(envelope(&id, &s, view)).into_response())
    })
    .await
}

async fn get_recommendation(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let shared = state.get(&id)?;
    blocking(move || {
        let s = read(&shared)?;
        let recommendation = s.recommendation()?;
        Ok(Json(envelope(&id, &s, RecommendationView { recommendation })).into_response())
    })
    .await
}

async fn get_log(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let shared = state.get(&id)?;
    blocking(move || {
        let s = read(&shared)?;
        let mut resp = s.log().to_jsonl().into_response();
        let h = resp.headers_mut();
        h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/x-ndjson"));
        let hv = |v: String| HeaderValue::from_str(&v).map_err(|e| ApiError::internal(e.to_string()));
        h.insert("x-session-id", hv(id.clone())?);
        h.insert("x-scenario-hash", hv(s.scenario_hash().to_string())?);
        h.insert("x-event-index", hv(s.event_index().to_string())?);
        Ok(resp)
    })
    .await
}

async fn post_close(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let shared = state.get(&id)?;
    blocking(move || {
        let mut s = write(&shared)?;
        let final_event = s.close()?;
        Ok(Json(envelope(&id, &s, CloseView { final_event })).into_response())
    })
    .await
}

async fn openapi() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI)
}
