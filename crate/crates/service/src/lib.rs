//! HTTP session API over a loaded index.
//!
//! Sessions live in memory and expire after an idle TTL. Mutations of one
//! session are serialized: a feedback or stop request that arrives while
//! another mutation of the same session is running is rejected with 409
//! instead of queueing. Reads wait for the running mutation to finish.

pub mod api;
pub mod schema;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use geoprefer_core::model::WordSet;
use geoprefer_core::{Error as CoreError, GirTree, Location, Phase, Query, Session, SessionConfig, Step, Strategy};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;

use api::*;

pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub idle_ttl: Duration,
    pub default_strategy: Strategy,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_ttl: DEFAULT_TTL,
            default_strategy: Strategy::DensestGraph,
        }
    }
}

type Slot = Arc<tokio::sync::Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    tree: Arc<GirTree>,
    config: ServiceConfig,
    sessions: Arc<Mutex<HashMap<String, (Slot, Instant)>>>,
}

impl AppState {
    pub fn new(tree: GirTree, config: ServiceConfig) -> Self {
        Self {
            tree: Arc::new(tree),
            config,
            sessions: Arc::default(),
        }
    }

    pub fn tree(&self) -> &GirTree {
        &self.tree
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle for longer than the TTL. Returns how many.
    pub fn purge_expired(&self) -> usize {
        let ttl = self.config.idle_ttl;
        let mut map = self.sessions.lock().unwrap();
        let before = map.len();
        map.retain(|_, (_, touched)| touched.elapsed() <= ttl);
        before - map.len()
    }

    fn lookup(&self, id: &str) -> Result<Slot, ApiError> {
        let mut map = self.sessions.lock().unwrap();
        match map.get_mut(id) {
            Some((_, touched)) if touched.elapsed() > self.config.idle_ttl => {
                map.remove(id);
                Err(ApiError::not_found(format!("unknown session {id}")))
            }
            Some((slot, touched)) => {
                *touched = Instant::now();
                Ok(slot.clone())
            }
            None => Err(ApiError::not_found(format!("unknown session {id}"))),
        }
    }

    fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let now = Instant::now();
        let slot = Arc::new(tokio::sync::Mutex::new(session));
        self.sessions.lock().unwrap().insert(id.clone(), (slot, now));
        id
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>, field: Option<&str>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                field: field.map(str::to_string),
            },
        }
    }

    fn not_found(error: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, error, None)
    }

    fn invalid(field: &str, error: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, format!("{field}: {}", error.into()), Some(field))
    }

    fn conflict(error: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, error, None)
    }

    fn from_core(e: CoreError, field: &str) -> Self {
        match e {
            CoreError::WrongPhase(_) => Self::conflict(e.to_string()),
            CoreError::NotShown(_)
            | CoreError::UnknownObject(_)
            | CoreError::InconsistentFeedback(_)
            | CoreError::InvalidQuery(_)
            | CoreError::NoCandidates => Self::invalid(field, e.to_string()),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// Parses a JSON body; failures become 422 naming the offending field.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner().to_string();
        let path = e.path().to_string();
        let field = if path == "." {
            missing_field(&inner).unwrap_or_else(|| "body".to_string())
        } else {
            path
        };
        ApiError::invalid(&field, inner)
    })
}

fn missing_field(message: &str) -> Option<String> {
    let rest = message
        .strip_prefix("missing field `")
        .or_else(|| message.strip_prefix("unknown field `"))?;
    Some(rest.split('`').next()?.to_string())
}

fn step_view(tree: &GirTree, session: &Session) -> StepView {
    match session.step() {
        Step::Show { round, shown } => StepView::Round(RoundView {
            round,
            candidates: shown
                .iter()
                .map(|&id| CandidateView::new(tree, session.candidate(id).expect("shown ids are candidates")))
                .collect(),
        }),
        Step::Done { .. } => StepView::Done(done_view(tree, session)),
    }
}

fn done_view(tree: &GirTree, session: &Session) -> DoneView {
    DoneView {
        done: true,
        results: session
            .results()
            .unwrap_or_default()
            .iter()
            .map(|r| ResultView::new(tree, r))
            .collect(),
        rounds_used: session.rounds_used(),
        p_hat: session.estimate().expect("terminated sessions have an estimate").p.clone(),
    }
}

fn build_query(req: &CreateSession) -> Result<Query, ApiError> {
    if !(-90.0..=90.0).contains(&req.lat) {
        return Err(ApiError::invalid("lat", "must lie in [-90, 90]"));
    }
    if !(-180.0..=180.0).contains(&req.lon) {
        return Err(ApiError::invalid("lon", "must lie in [-180, 180]"));
    }
    if req.words.is_empty() {
        return Err(ApiError::invalid("words", "must be non-empty"));
    }
    let mut q = Query::new(Location::new(req.lon, req.lat), WordSet::from_iter(req.words.iter().copied()));
    if let Some(k) = req.k {
        if k < 1 {
            return Err(ApiError::invalid("k", "must be at least 1"));
        }
        q = q.with_k(k);
    }
    if let Some(theta) = req.theta {
        if theta < 2 {
            return Err(ApiError::invalid("theta", "must be at least 2"));
        }
        q = q.with_theta(theta);
    }
    if let Some(lambda) = req.lambda {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(ApiError::invalid("lambda", "must lie in [0, 1]"));
        }
        q = q.with_lambda(lambda);
    }
    Ok(q)
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None))
}

fn json<T: Serialize>(status: StatusCode, body: T) -> Response {
    (status, Json(body)).into_response()
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let query = build_query(&req)?;
    let config = SessionConfig {
        strategy: req.strategy.unwrap_or(state.config.default_strategy),
        seed: req.seed.unwrap_or(0),
        ..Default::default()
    };
    let tree = state.tree.clone();
    let session = blocking(move || Session::start(&tree, query, config))
        .await?
        .map_err(|e| ApiError::from_core(e, "words"))?;
    let step = step_view(&state.tree, &session);
    let session_id = state.insert(session);
    Ok(json(StatusCode::CREATED, Created { session_id, step }))
}

/// Locks the session for a mutation, or answers 409 if one is running.
fn lock_for_write(slot: Slot) -> Result<tokio::sync::OwnedMutexGuard<Session>, ApiError> {
    slot.try_lock_owned()
        .map_err(|_| ApiError::conflict("another request is updating this session"))
}

async fn feedback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let slot = state.lookup(&id)?;
    let req: Feedback = parse_body(&body)?;
    let mut entry = lock_for_write(slot)?;
    if entry.phase() == Phase::Terminated {
        return Err(ApiError::conflict("session has terminated"));
    }
    let tree = state.tree.clone();
    let view = blocking(move || {
        entry
            .submit_feedback(&tree, req.chosen_id)
            .map(|_| step_view(&tree, &entry))
    })
    .await?
    .map_err(|e| ApiError::from_core(e, "chosen_id"))?;
    Ok(json(StatusCode::OK, view))
}

async fn stop(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = state.lookup(&id)?;
    let mut entry = lock_for_write(slot)?;
    let tree = state.tree.clone();
    let view = blocking(move || {
        entry.stop(&tree).map(|_| done_view(&tree, &entry))
    })
    .await?
    .map_err(|e| ApiError::from_core(e, "body"))?;
    Ok(json(StatusCode::OK, view))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = state.lookup(&id)?;
    let entry = slot.lock().await;
    let s = &entry;
    let q = s.query();
    let step = step_view(&state.tree, s);
    let (round, candidates, results, p_hat) = match step {
        StepView::Round(r) => (Some(r.round), Some(r.candidates), None, None),
        StepView::Done(d) => (None, None, Some(d.results), Some(d.p_hat)),
    };
    let body = SessionState {
        session_id: id,
        phase: s.phase(),
        query: QueryView {
            lat: q.location.lat,
            lon: q.location.lon,
            words: q.words.as_slice().to_vec(),
            k: q.k,
            theta: q.theta,
            lambda: q.lambda,
            strategy: s.config().strategy,
        },
        candidate_count: s.candidates().len(),
        remaining: s.graph().vertex_count(),
        rounds_used: s.rounds_used(),
        done: s.phase() == Phase::Terminated,
        round,
        candidates,
        results,
        p_hat,
    };
    Ok(json(StatusCode::OK, body))
}

async fn get_object(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let object = id
        .parse::<u64>()
        .ok()
        .and_then(|n| state.tree.object_by_id(n))
        .ok_or_else(|| ApiError::not_found(format!("unknown object {id}")))?;
    Ok(json(
        StatusCode::OK,
        ObjectView {
            id: object.id,
            lat: object.location.lat,
            lon: object.location.lon,
            words: object.words.as_slice().to_vec(),
            image_url: object.image_url.clone(),
            tags: object.tags.clone(),
        },
    ))
}

async fn get_schema(Path(name): Path<String>) -> Result<Response, ApiError> {
    let text = schema::by_name(&name).ok_or_else(|| ApiError::not_found(format!("unknown schema {name}")))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/schema+json")], text).into_response())
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/stop", post(stop))
        .route("/objects/{id}", get(get_object))
        .route("/schemas/{name}", get(get_schema))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Serves until the process ends, purging idle sessions once a minute.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    let janitor = state.clone();
    let period = janitor.config.idle_ttl.min(Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            janitor.purge_expired();
        }
    });
    axum::serve(listener, router(state)).await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}
