//! Drives the HTTP API in process: upload a case, start an optimize job,
//! poll it and fetch the stored run.

use std::time::Duration;

use axum::body::Body;
use axum::http::Request;
use gridshed::grid::{read_case_file, serialize_case};
use gridshed::report::RunStore;
use gridshed_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: String) -> Value {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    println!("{method} {uri} -> {status}");
    value
}

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig::default();
    let app = router(AppState::new(RunStore::open(dir.path()).unwrap(), &cfg), &cfg);

    let case = read_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/case9.m")).unwrap();
    let uploaded = call(&app, "POST", "/cases", serialize_case(&case)).await;
    let id = uploaded["id"].as_str().unwrap();

    let body = json!({"outage": [8], "mode": "partial", "seed": 1});
    let mut job = call(&app, "POST", &format!("/cases/{id}/optimize"), body.to_string()).await;
    while !matches!(job["state"].as_str(), Some("done" | "failed")) {
        tokio::time::sleep(Duration::from_millis(50)).await;
        job = call(&app, "GET", &format!("/jobs/{}", job["id"].as_str().unwrap()), String::new()).await;
        println!("  progress {}/{}", job["progress"]["done"], job["progress"]["total"]);
    }

    let run = call(&app, "GET", &format!("/runs/{}", job["run_id"].as_str().unwrap()), String::new()).await;
    let result = &run["payload"]["optimize"]["result"];
    println!("feasible={} shed={} MW", result["feasible"], result["shed_mw"]);
    println!("{}", serde_json::to_string_pretty(&result["shed_loads"]).unwrap());
}
