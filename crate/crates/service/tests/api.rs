use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use geoprefer_core::girtree::DEFAULT_FANOUT;
use geoprefer_core::ingest::load_jsonl;
use geoprefer_core::scoring::f_prefer;
use geoprefer_core::{GirTree, Location, PreferenceVector, Query, SignatureConfig};
use geoprefer_service::{router, schema, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/objects200.jsonl");

fn fixture_tree() -> GirTree {
    let objects = load_jsonl(FIXTURE).unwrap();
    GirTree::build(objects, DEFAULT_FANOUT, SignatureConfig::default()).unwrap()
}

fn app_with(config: ServiceConfig) -> (Router, AppState) {
    let state = AppState::new(fixture_tree(), config);
    (router(state.clone()), state)
}

fn app() -> Router {
    app_with(ServiceConfig::default()).0
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

fn assert_schema(name: &str, value: &Value) {
    let schema: Value = serde_json::from_str(schema::by_name(name).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name} schema violations: {errors:?} in {value}");
}

fn start_body() -> Value {
    json!({"lat": 40.75, "lon": -73.95, "words": [0, 1, 2, 3, 5, 8, 13, 21]})
}

#[tokio::test]
async fn healthz_is_ok() {
    let (status, body) = call(&app(), Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, Value::String("ok".into()));
}

#[tokio::test]
async fn every_published_schema_compiles() {
    for name in schema::NAMES {
        let schema: Value = serde_json::from_str(schema::by_name(name).unwrap()).unwrap();
        jsonschema::validator_for(&schema).unwrap();
    }
    let (status, body) = call(&app(), Method::GET, "/schemas/step", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["title"], "Round or final results");
}

#[tokio::test]
async fn create_returns_first_round_with_defaults() {
    let app = app();
    let (status, body) = call(&app, Method::POST, "/sessions", Some(start_body())).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_schema("created", &body);
    assert_eq!(body["round"], 1);
    let shown = body["candidates"].as_array().unwrap();
    assert!(!shown.is_empty() && shown.len() <= 8);

    let id = body["session_id"].as_str().unwrap();
    let (status, state) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_schema("session", &state);
    assert_eq!(state["query"]["k"], 20);
    assert_eq!(state["query"]["theta"], 8);
    assert_eq!(state["query"]["lambda"], 0.5);
    assert_eq!(state["query"]["strategy"], "densest");
    assert_eq!(state["phase"], "Interaction");
    assert_eq!(state["candidates"], body["candidates"]);
}

#[tokio::test]
async fn k_at_least_n_finishes_immediately() {
    let app = app();
    let mut body = start_body();
    body["k"] = json!(500);
    let (status, body) = call(&app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_schema("created", &body);
    assert_eq!(body["done"], true);
    assert_eq!(body["rounds_used"], 0);
    assert_eq!(body["results"].as_array().unwrap().len(), 200);
}

#[tokio::test]
async fn invalid_bodies_name_the_field() {
    let app = app();
    let cases = [
        (json!({"lon": 0.0, "words": [1]}), "lat"),
        (json!({"lat": "north", "lon": 0.0, "words": [1]}), "lat"),
        (json!({"lat": 95.0, "lon": 0.0, "words": [1]}), "lat"),
        (json!({"lat": 0.0, "lon": 0.0, "words": []}), "words"),
        (json!({"lat": 0.0, "lon": 0.0, "words": [1, -2]}), "words[1]"),
        (json!({"lat": 0.0, "lon": 0.0, "words": [1], "k": 0}), "k"),
        (json!({"lat": 0.0, "lon": 0.0, "words": [1], "theta": 1}), "theta"),
        (json!({"lat": 0.0, "lon": 0.0, "words": [1], "lambda": 2.0}), "lambda"),
        (json!({"lat": 0.0, "lon": 0.0, "words": [1], "strategy": "best"}), "strategy"),
        (json!({"lat": 0.0, "lon": 0.0, "words": [1], "colour": "red"}), "colour"),
    ];
    for (body, field) in cases {
        let (status, err) = call(&app, Method::POST, "/sessions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_schema("error", &err);
        assert_eq!(err["field"], field, "{body} -> {err}");
        assert!(err["error"].as_str().unwrap().contains(field), "{err}");
    }
    let req = Request::post("/sessions").body(Body::from("{not json")).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app();
    for (method, uri) in [
        (Method::GET, "/sessions/nope"),
        (Method::POST, "/sessions/nope/stop"),
        (Method::GET, "/objects/99999"),
        (Method::GET, "/objects/abc"),
    ] {
        let (status, err) = call(&app, method, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_schema("error", &err);
    }
    let (status, _) = call(&app, Method::POST, "/sessions/nope/feedback", Some(json!({"chosen_id": 1}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn object_metadata() {
    let (status, body) = call(&app(), Method::GET, "/objects/7", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_schema("object", &body);
    assert_eq!(body["id"], 7);
    assert!(!body["words"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn feedback_outside_the_round_is_422_and_after_stop_is_409() {
    let app = app();
    let (_, created) = call(&app, Method::POST, "/sessions", Some(start_body())).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let shown: Vec<u64> = created["candidates"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    let outsider = (0..200u64).find(|i| !shown.contains(i)).unwrap();
    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/feedback"), Some(json!({"chosen_id": outsider}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field"], "chosen_id");
    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/feedback"), Some(json!({}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field"], "chosen_id");

    let (status, done) = call(&app, Method::POST, &format!("/sessions/{id}/stop"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_schema("done", &done);
    assert_eq!(done["rounds_used"], 0);
    assert_eq!(done["results"].as_array().unwrap().len(), 20);

    let (status, again) = call(&app, Method::POST, &format!("/sessions/{id}/stop"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, done);
    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/feedback"), Some(json!({"chosen_id": shown[0]}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_schema("error", &err);
    let (_, state) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_schema("session", &state);
    assert_eq!(state["done"], true);
    assert_eq!(state["phase"], "Terminated");
}

/// Picks like a user with the hidden preference `p`.
fn favourite(tree: &GirTree, q: &Query, p: &PreferenceVector, candidates: &Value) -> u64 {
    candidates
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["id"].as_u64().unwrap())
        .map(|id| (f_prefer(q, tree.object_by_id(id).unwrap(), p, tree.frame()), id))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .unwrap()
        .1
}

#[tokio::test]
async fn scripted_session_finishes_within_ten_rounds() {
    let tree = fixture_tree();
    let app = app();
    let words = [0u32, 1, 2, 3, 5, 8, 13, 21];
    let q = Query::new(Location::new(-73.95, 40.75), words.iter().copied().collect());
    let p = PreferenceVector::new(0.7, vec![0.2, 0.9, 0.4, 0.1, 0.6, 0.3, 0.8, 0.5]).unwrap();
    for strategy in ["densest", "random"] {
        let mut body = start_body();
        body["strategy"] = json!(strategy);
        let (status, mut step) = call(&app, Method::POST, "/sessions", Some(body)).await;
        assert_eq!(status, StatusCode::CREATED);
        assert_schema("created", &step);
        let id = step["session_id"].as_str().unwrap().to_string();
        let mut rounds = 0;
        while step.get("done").is_none() {
            rounds += 1;
            assert!(rounds <= 10, "{strategy}: still asking after 10 rounds");
            let chosen = favourite(&tree, &q, &p, &step["candidates"]);
            let (status, next) = call(&app, Method::POST, &format!("/sessions/{id}/feedback"), Some(json!({"chosen_id": chosen}))).await;
            assert_eq!(status, StatusCode::OK, "{next}");
            assert_schema("step", &next);
            if next.get("round").is_some() {
                assert_eq!(next["round"], rounds + 1);
            }
            step = next;
        }
        assert_eq!(step["rounds_used"], rounds);
        let results = step["results"].as_array().unwrap();
        assert_eq!(results.len(), 20);
        let scores: Vec<f64> = results.iter().map(|r| r["score"].as_f64().unwrap()).collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[tokio::test]
async fn sessions_do_not_share_state() {
    let app = app();
    let (_, a) = call(&app, Method::POST, "/sessions", Some(start_body())).await;
    let (_, b) = call(&app, Method::POST, "/sessions", Some(start_body())).await;
    assert_ne!(a["session_id"], b["session_id"]);
    let a_id = a["session_id"].as_str().unwrap();
    let b_id = b["session_id"].as_str().unwrap();
    call(&app, Method::POST, &format!("/sessions/{a_id}/stop"), None).await;
    let (_, b_state) = call(&app, Method::GET, &format!("/sessions/{b_id}"), None).await;
    assert_eq!(b_state["phase"], "Interaction");
    assert_eq!(b_state["candidates"], b["candidates"]);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let (app, state) = app_with(ServiceConfig {
        idle_ttl: Duration::from_millis(50),
        ..Default::default()
    });
    let (_, created) = call(&app, Method::POST, "/sessions", Some(start_body())).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(state.session_count(), 1);
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    call(&app, Method::POST, "/sessions", Some(start_body())).await;
    tokio::time::sleep(Duration::from_millis(120)).await;
    assert_eq!(state.purge_expired(), 1);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_feedback_on_one_session_is_serialized() {
    let app = app();
    let (_, created) = call(&app, Method::POST, "/sessions", Some(start_body())).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let chosen = created["candidates"][0]["id"].as_u64().unwrap();
    let uri = format!("/sessions/{id}/feedback");
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let (app, uri) = (app.clone(), uri.clone());
            tokio::spawn(async move { call(&app, Method::POST, &uri, Some(json!({"chosen_id": chosen}))).await })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        let (status, body) = t.await.unwrap();
        match status {
            StatusCode::OK => ok += 1,
            // lost the race for the lock, or arrived after the round moved on
            StatusCode::CONFLICT | StatusCode::UNPROCESSABLE_ENTITY => assert_schema("error", &body),
            other => panic!("unexpected {other}: {body}"),
        }
    }
    assert!(ok >= 1);
    let (_, state) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(state["rounds_used"].as_u64().unwrap(), ok);
}
