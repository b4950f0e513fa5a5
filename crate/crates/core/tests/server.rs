use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use layoutforge::config::AppConfig;
use layoutforge::denoiser::{Architecture, DenoiserParams, LoadedModel};
use layoutforge::server::{router, AppState, GenerateResponse};

fn app(static_dir: Option<&Path>) -> Router {
    let cfg = AppConfig::default();
    let model = LoadedModel {
        params: DenoiserParams::init(Architecture::default(), 5),
        schedule: cfg.schedule,
        sidecar: None,
        version: "test".into(),
    };
    router(Arc::new(AppState::new(model, &cfg).unwrap()), static_dir)
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (st, bytes) = send(app, "POST", uri, Some(&body.to_string())).await;
    (st, serde_json::from_slice(&bytes).unwrap())
}

async fn field_of(app: &Router, uri: &str, body: Value) -> String {
    let (st, v) = post(app, uri, body).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{v}");
    assert!(v["error"].is_string());
    v["field"].as_str().unwrap().to_string()
}

async fn generated_layout(app: &Router, seed: u64) -> Value {
    let (st, v) = post(app, "/api/generate", json!({"prompt": "login", "seed": seed})).await;
    assert_eq!(st, StatusCode::OK);
    v["layout"].clone()
}

#[tokio::test]
async fn health_and_vocab() {
    let app = app(None);
    let (st, body) = send(&app, "GET", "/health", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap(), json!({"status": "ok"}));

    let (st, body) = send(&app, "GET", "/api/vocab", None).await;
    assert_eq!(st, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["keywords"].as_array().unwrap().len(), 32);
    assert!(v["keywords"].as_array().unwrap().contains(&json!("login")));
    assert_eq!(v["sketch"], json!({"rows": 8, "cols": 8}));
}

#[tokio::test]
async fn generate_is_deterministic_per_seed() {
    let app = app(None);
    let body = json!({"prompt": "login dark", "sketch": vec![0.25; 64], "seed": 42});
    let (st, a) = post(&app, "/api/generate", body.clone()).await;
    assert_eq!(st, StatusCode::OK);
    let resp: GenerateResponse = serde_json::from_value(a.clone()).unwrap();
    assert_eq!(resp.model_version, "test");
    assert!(resp.sample_time_ms >= 0.0);

    let (_, b) = post(&app, "/api/generate", body).await;
    assert_eq!(a["layout"], b["layout"]);
    assert_eq!(a["rule_report"], b["rule_report"]);
    assert_ne!(generated_layout(&app, 1).await, generated_layout(&app, 2).await);

    let (st, raw) = post(&app, "/api/generate", json!({"seed": 42, "projection": false})).await;
    assert_eq!(st, StatusCode::OK);
    assert!(raw["layout"]["components"].is_array());
}

#[tokio::test]
async fn concurrent_requests_are_independent() {
    let app = app(None);
    let expected = generated_layout(&app, 9).await;
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { generated_layout(&app, 9).await })
        })
        .collect();
    for h in handles {
        assert_eq!(h.await.unwrap(), expected);
    }
}

#[tokio::test]
async fn generate_validation_names_fields() {
    let app = app(None);
    let g = "/api/generate";
    assert_eq!(field_of(&app, g, json!({"seed": 1, "sketch": vec![0.0; 63]})).await, "sketch");
    let mut sketch = vec![0.0; 64];
    sketch[3] = 1.5;
    assert_eq!(field_of(&app, g, json!({"seed": 1, "sketch": sketch})).await, "sketch[3]");
    assert_eq!(field_of(&app, g, json!({"seed": 1, "sketch": [0.0, "x"]})).await, "sketch[1]");
    assert_eq!(field_of(&app, g, json!({"prompt": "login"})).await, "seed");
    assert_eq!(field_of(&app, g, json!({"seed": -4})).await, "seed");
    assert_eq!(field_of(&app, g, json!({"seed": 1, "colour": 2})).await, "colour");

    let (st, bytes) = send(&app, "POST", g, Some("{not json")).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(serde_json::from_slice::<Value>(&bytes).unwrap()["field"], "body");
}

#[tokio::test]
async fn refine_preserves_pins() {
    let app = app(None);
    let layout = generated_layout(&app, 3).await;
    let (st, v) = post(&app, "/api/refine", json!({"layout": layout, "pinned": [0], "seed": 11})).await;
    assert_eq!(st, StatusCode::OK);
    let (a, b) = (&layout["components"][0], &v["layout"]["components"][0]);
    assert_eq!(a["type"], b["type"]);
    assert_eq!(a["visible"], b["visible"]);
    for key in ["cx", "cy", "w", "h"] {
        assert!((a[key].as_f64().unwrap() - b[key].as_f64().unwrap()).abs() <= 1e-6);
    }

    let n = layout["components"].as_array().unwrap().len();
    let all: Vec<usize> = (0..n).collect();
    let (st, v) = post(
        &app,
        "/api/refine",
        json!({"layout": layout, "pinned": all, "seed": 5, "prompt": "login", "t_start": 40}),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    for (x, y) in layout["components"].as_array().unwrap().iter().zip(v["layout"]["components"].as_array().unwrap()) {
        assert_eq!(x["type"], y["type"]);
        for key in ["cx", "cy", "w", "h"] {
            assert!((x[key].as_f64().unwrap() - y[key].as_f64().unwrap()).abs() <= 1e-6);
        }
    }
}

#[tokio::test]
async fn refine_validation_names_fields() {
    let app = app(None);
    let layout = generated_layout(&app, 3).await;
    let r = "/api/refine";
    assert_eq!(field_of(&app, r, json!({"layout": layout, "pinned": [0, 50], "seed": 1})).await, "pinned[1]");
    assert_eq!(field_of(&app, r, json!({"layout": layout, "pinned": [], "seed": 1, "t_start": 0})).await, "t_start");
    assert_eq!(field_of(&app, r, json!({"layout": layout, "pinned": [], "seed": 1, "t_start": 201})).await, "t_start");
    assert_eq!(field_of(&app, r, json!({"layout": layout, "seed": 1})).await, "pinned");
    assert_eq!(
        field_of(&app, r, json!({"layout": layout, "pinned": [], "seed": 1, "sketch": [0.5]})).await,
        "sketch"
    );
    let mut broken = layout.clone();
    broken["components"][0]["cx"] = json!(2.0);
    assert_eq!(field_of(&app, r, json!({"layout": broken, "pinned": [], "seed": 1})).await, "layout");
    let mut typo = layout.clone();
    typo["components"][0]["type"] = json!("widget");
    assert_eq!(
        field_of(&app, r, json!({"layout": typo, "pinned": [], "seed": 1})).await,
        "layout.components[0].type"
    );
}

#[tokio::test]
async fn unknown_routes_and_methods() {
    let app = app(None);
    let (st, bytes) = send(&app, "GET", "/api/nothing", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert!(serde_json::from_slice::<Value>(&bytes).unwrap()["error"].is_string());
    let (st, _) = send(&app, "GET", "/api/generate", None).await;
    assert_eq!(st, StatusCode::METHOD_NOT_ALLOWED);
}

#[tokio::test]
async fn serves_static_assets_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("index.html"), "<html>studio</html>").unwrap();
    let app = app(Some(dir.path()));
    let (st, body) = send(&app, "GET", "/", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body, b"<html>studio</html>");
    let (st, bytes) = send(&app, "GET", "/missing.js", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert!(serde_json::from_slice::<Value>(&bytes).unwrap()["error"].is_string());
    let (st, _) = send(&app, "GET", "/health", None).await;
    assert_eq!(st, StatusCode::OK);
}
