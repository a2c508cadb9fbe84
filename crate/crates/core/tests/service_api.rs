use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use elicit::judgements::{canonical_set, CanonicalKind};
use elicit::service::{router, SessionStore};

fn app() -> (Router, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(SessionStore::open(dir.path()).unwrap());
    (router(store, None), dir)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value, bytes)
}

fn five() -> Value {
    serde_json::to_value(canonical_set(CanonicalKind::Five, false)).unwrap()
}

#[tokio::test]
async fn fit_five_point_normal() {
    let (app, _dir) = app();
    let mut body = five();
    body["families"] = json!(["normal"]);
    let (status, v, _) = call(&app, "POST", "/fit", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let ls = &v["fits"][0]["least_squares"]["ok"]["dist"];
    assert!(ls["location"].as_f64().unwrap().abs() < 1e-6, "{ls}");
    assert!((ls["scale"].as_f64().unwrap() - 1.0).abs() < 1e-6, "{ls}");
}

#[tokio::test]
async fn identical_fit_bodies() {
    let (app, _dir) = app();
    let mut body = five();
    body["families"] = json!(["normal", "t5", "cauchy"]);
    let (_, _, a) = call(&app, "POST", "/fit", Some(body.clone())).await;
    let (_, _, b) = call(&app, "POST", "/fit", Some(body)).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn invalid_judgements_are_422() {
    let (app, _dir) = app();
    let body = json!({"judgements": [{"p": 0.7, "x": 0.0}, {"p": 0.3, "x": 1.0}], "families": ["normal"]});
    let (status, v, _) = call(&app, "POST", "/fit", Some(body.clone())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_judgements");
    let (status, _, _) = call(&app, "POST", "/feasible", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn malformed_body_is_bad_request() {
    let (app, _dir) = app();
    let (status, v, _) = call(&app, "POST", "/fit", Some(json!({"families": "normal"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_request");
}

#[tokio::test]
async fn feasible_reports_each_family() {
    let (app, _dir) = app();
    let mut body = serde_json::to_value(canonical_set(CanonicalKind::Five, true)).unwrap();
    body["families"] = json!(["normal", "cauchy"]);
    let (status, v, _) = call(&app, "POST", "/feasible", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["results"][0]["feasibility"]["ok"]["feasible"], true);
    assert_eq!(v["results"][1]["feasibility"]["ok"]["feasible"], true);
}

#[tokio::test]
async fn feedback_with_figure() {
    let (app, _dir) = app();
    let body = json!({
        "fits": [
            {"family": "normal", "location": 0.0, "scale": 1.0},
            {"family": "cauchy", "location": 0.0, "scale": 0.6745}
        ],
        "figure": {"judgements": five(), "n_points": 11}
    });
    let (status, v, _) = call(&app, "POST", "/feedback", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["report"]["quantiles"].as_array().unwrap().len(), 2);
    assert_eq!(v["figure"]["x"].as_array().unwrap().len(), 11);
}

#[tokio::test]
async fn session_lifecycle() {
    let (app, _dir) = app();
    let (status, v, _) = call(&app, "POST", "/sessions", Some(json!({"id": "s1", "quantity_label": "Y"}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["state"], "collecting");

    let (status, v, _) =
        call(&app, "POST", "/sessions/s1/events", Some(json!({"type": "fit", "families": ["normal"]}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "invalid_transition");

    let (status, _, _) =
        call(&app, "POST", "/sessions/s1/events", Some(json!({"type": "add_judgements", "judgements": five()}))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, posted, _) =
        call(&app, "POST", "/sessions/s1/events", Some(json!({"type": "fit", "families": ["normal", "cauchy"]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(posted["state"], "fitted");

    let (status, got, _) = call(&app, "GET", "/sessions/s1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got, posted);
    assert_eq!(got["events"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn session_without_body_gets_generated_id() {
    let (app, _dir) = app();
    let (status, v, _) = call(&app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(!v["id"].as_str().unwrap().is_empty());
}

#[tokio::test]
async fn unknown_session_is_404() {
    let (app, _dir) = app();
    let (status, v, _) = call(&app, "GET", "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
    let (status, _, _) = call(&app, "POST", "/sessions/missing/events", Some(json!({"type": "finalize"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_conflicting_events() {
    let (app, _dir) = app();
    call(&app, "POST", "/sessions", Some(json!({"id": "race"}))).await;
    call(&app, "POST", "/sessions/race/events", Some(json!({"type": "add_judgements", "judgements": five()}))).await;
    call(&app, "POST", "/sessions/race/events", Some(json!({"type": "fit", "families": ["normal"]}))).await;

    call(&app, "POST", "/sessions/race/events", Some(json!({"type": "show_feedback"}))).await;

    // Both are legal from `feedback_given`; whichever lands first makes the other illegal.
    let a = {
        let app = app.clone();
        tokio::spawn(
            async move { call(&app, "POST", "/sessions/race/events", Some(json!({"type": "finalize"}))).await.0 },
        )
    };
    let b = {
        let app = app.clone();
        tokio::spawn(async move {
            call(&app, "POST", "/sessions/race/events", Some(json!({"type": "revise", "judgements": five()}))).await.0
        })
    };
    let mut statuses = vec![a.await.unwrap(), b.await.unwrap()];
    statuses.sort();
    assert_eq!(statuses, vec![StatusCode::OK, StatusCode::CONFLICT]);

    let (_, v, _) = call(&app, "GET", "/sessions/race", None).await;
    assert!(v["state"] == "finalized" || v["state"] == "collecting", "{}", v["state"]);
    assert_eq!(v["events"].as_array().unwrap().len(), 4);
}
