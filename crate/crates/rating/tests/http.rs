use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use storyteller_rating::http::router;
use storyteller_rating::{build_pool, RatingService, ServiceConfig};
use tower::ServiceExt;

fn app(n: usize, raters_per_story: usize, static_dir: Option<std::path::PathBuf>) -> Router {
    let stories = |p: &str| -> Vec<(String, Vec<String>)> {
        (0..n)
            .map(|i| (format!("{p}{i}"), (0..5).map(|k| format!("part {k}")).collect()))
            .collect()
    };
    let svc = RatingService::new(
        build_pool(stories("m"), stories("h")),
        ServiceConfig {
            raters_per_story,
            ..Default::default()
        },
    )
    .unwrap();
    router(Arc::new(Mutex::new(svc)), static_dir)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into_owned()));
    (status, v)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(body: Value) -> Request<Body> {
    Request::post("/rating")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn task_rating_report_flow() {
    let app = app(2, 3, None);
    let (s, v) = call(&app, get("/report")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"status": "empty"}));

    let (s, task) = call(&app, get("/task?rater=w1")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(task["status"], "task");
    assert!(task.get("source").is_none());
    assert_eq!(task["segments"].as_array().unwrap().len(), 5);
    let id = task["task_id"].as_str().unwrap().to_string();

    let body = json!({"task_id": id, "rater_id": "w1", "scores": [3, 3, 3, 3, 3, 3]});
    let (s, ack) = call(&app, post(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let (s, again) = call(&app, post(body)).await;
    assert_eq!((s, &again), (StatusCode::OK, &ack));

    let (s, v) = call(&app, post(json!({"task_id": id, "rater_id": "w1", "scores": [4, 3, 3, 3, 3, 3]}))).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");
    let (s, v) = call(&app, post(json!({"task_id": id, "rater_id": "w2", "scores": [3, 3, 6, 3, 3, 3]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("aspect c)"), "{v}");
    let (s, _) = call(&app, post(json!({"task_id": "nope", "rater_id": "w2", "scores": [3, 3, 3, 3, 3, 3]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, post(json!({"task_id": id, "rater_id": "w2", "scores": [3, 3]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, post(json!({"task_id": id, "scores": [3, 3, 3, 3, 3, 3]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, post(json!({"task_id": id, "rater_id": "w2", "scores": [3.5, 3, 3, 3, 3, 3]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, v) = call(&app, get("/report")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["report"]["sources"][0]["total"], 18.0);
    assert!(v["table"].as_str().unwrap().contains("Total score"));

    let (s, v) = call(&app, get("/health")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["ratings"], 1);
    assert_eq!(v["tasks"], 4);
}

#[tokio::test]
async fn exhaustion_is_distinct() {
    let app = app(1, 1, None);
    for _ in 0..2 {
        let (_, t) = call(&app, get("/task?rater=w")).await;
        let id = t["task_id"].as_str().unwrap().to_string();
        call(&app, post(json!({"task_id": id, "rater_id": "w", "scores": [2, 2, 2, 2, 2, 2]}))).await;
    }
    let (s, v) = call(&app, get("/task?rater=w")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"status": "exhausted"}));
    let (s, _) = call(&app, get("/task")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn two_hundred_submissions_reproduce_configured_means() {
    let target = [3.347, 3.278, 2.871, 3.222, 2.886, 2.893];
    let app = app(200, 1, None);
    for r in 0..200 {
        let (_, t) = call(&app, get("/task?rater=sim")).await;
        let id = t["task_id"].as_str().unwrap().to_string();
        // Rater r gives floor(m) + 1 on aspect a when r < frac(m) * 200.
        let scores: Vec<i64> = target
            .iter()
            .map(|&m: &f64| m.floor() as i64 + ((r as f64) < (m.fract() * 200.0).round()) as i64)
            .collect();
        let (s, _) = call(&app, post(json!({"task_id": id, "rater_id": "sim", "scores": scores}))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, v) = call(&app, get("/report")).await;
    let sources = v["report"]["sources"].as_array().unwrap();
    let mut n = 0;
    for src in sources {
        let means: Vec<f64> = src["means"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let total = src["total"].as_f64().unwrap();
        assert!((total - means.iter().sum::<f64>()).abs() <= 1e-9);
        n += src["ratings"].as_u64().unwrap();
    }
    assert_eq!(n, 200);
    // Pool interleaves sources, so each got every other rater's scores; pool them.
    let all: Vec<f64> = (0..6)
        .map(|a| {
            sources
                .iter()
                .map(|s| s["means"][a].as_f64().unwrap() * s["ratings"].as_f64().unwrap())
                .sum::<f64>()
                / 200.0
        })
        .collect();
    for (m, t) in all.iter().zip(target) {
        assert!((m - t).abs() <= 0.01, "{m} vs {t}");
    }
}

#[tokio::test]
async fn static_files_are_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>rate</html>").unwrap();
    let app = app(1, 1, Some(dir.path().to_path_buf()));
    let (s, v) = call(&app, get("/index.html")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, Value::String("<html>rate</html>".into()));
    let (s, _) = call(&app, get("/")).await;
    assert_eq!(s, StatusCode::OK);
}
