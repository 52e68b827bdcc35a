use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use optir_cli::serve::{router, AppState};
use optir_core::ir::parse_ir;
use optir_core::model::CompileOptions;
use optir_core::solver::SolveOptions;
use optir_core::whatif::solve_instance;
use optir_instgen::{generate, Family, GenConfig, Scale};
use serde_json::{json, Value};
use std::sync::Arc;
use tower::ServiceExt;

const REL_TOL: f64 = 1e-9;

fn app() -> Router {
    let inst = generate(&GenConfig::new(Family::Assignment, 42, Scale::assignment(3, 8))).unwrap();
    let model = parse_ir(inst.ir()).unwrap().model;
    let base = solve_instance(model, inst.store, &CompileOptions::default(), &SolveOptions::default()).unwrap();
    router(Arc::new(AppState::new(base, CompileOptions::default(), SolveOptions::default(), 2)))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, body: &str) -> (StatusCode, Value) {
    call(app, Method::POST, "/scenario", Some(body)).await
}

#[tokio::test]
async fn model_catalog_and_pages() {
    let app = app();
    let (s, m) = get(&app, "/model").await;
    assert_eq!(s, StatusCode::OK);
    let params = m["parameters"].as_array().unwrap();
    assert_eq!(params.len(), 4);
    assert_eq!(params[1]["name"], "cost");
    assert_eq!(params[1]["rows"], 24);
    assert_eq!(m["stats"]["binary"], 24);
    assert_eq!(m["constraints"][0]["rows"], 8);

    let (s, page) = get(&app, "/model/parameters/cost?page=4&page_size=5").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(page["pages"], 5);
    assert_eq!(page["rows"].as_array().unwrap().len(), 4);
    assert_eq!(page["columns"], json!(["shipment_id", "carrier_id", "cost"]));
    let (_, first) = get(&app, "/model/parameters/cost").await;
    assert_eq!(first["page_size"], 100);
    assert_eq!(first["rows"].as_array().unwrap().len(), 24);
    let (_, beyond) = get(&app, "/model/parameters/cost?page=9").await;
    assert!(beyond["rows"].as_array().unwrap().is_empty());

    assert_eq!(get(&app, "/model/parameters/cost?page_size=0").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/model/parameters/nope").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn scenario_lifecycle() {
    let app = app();
    let (s, base) = get(&app, "/solution").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(base["status"], "optimal");
    let b = base["objective"].as_f64().unwrap();
    assert!(b > 0.0);
    assert_eq!(base["groups"][0]["group_name"], "x");

    // revenue and cost both doubled: every coefficient doubles
    let both = r#"[{"kind": "data", "param": "revenue", "selector": "all", "op": "scale", "value": 2},
                   {"kind": "data", "param": "cost", "selector": "all", "op": "scale", "value": 2}]"#;
    let (s, r) = post(&app, both).await;
    assert_eq!(s, StatusCode::OK);
    let id = r["id"].as_str().unwrap().to_string();
    let new = r["diff"]["new_objective"].as_f64().unwrap();
    assert!((new - 2.0 * b).abs() <= REL_TOL * b);

    // revenue alone doubled: the old assignment earns at least twice as much
    let (s, r) = post(&app, r#"{"patches": [{"kind": "data", "param": "revenue", "selector": "all", "op": "scale", "value": 2}], "top_k": 3}"#).await;
    assert_eq!(s, StatusCode::OK);
    assert!(r["diff"]["new_objective"].as_f64().unwrap() >= 2.0 * b - REL_TOL * b);
    assert!(r["diff"]["top_changes"].as_array().unwrap().len() <= 3);

    let (s, sol) = get(&app, &format!("/scenario/{id}/solution")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(sol["objective"], json!(new));
    let (s, sc) = get(&app, &format!("/scenario/{id}")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(sc["patches"].as_array().unwrap().len(), 2);
    let (_, list) = get(&app, "/scenarios").await;
    assert_eq!(list.as_array().unwrap().len(), 2);

    // base untouched
    assert_eq!(get(&app, "/solution").await.1, base);

    assert_eq!(call(&app, Method::DELETE, &format!("/scenario/{id}"), None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(get(&app, &format!("/scenario/{id}")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::DELETE, &format!("/scenario/{id}"), None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    assert_eq!(post(&app, "{not json").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, r#"[{"kind": "teleport"}]"#).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, r#"{"patches": [], "extra": 1}"#).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, r#"{"id": "bad id!", "patches": []}"#).await.0, StatusCode::BAD_REQUEST);

    let (s, body) = post(&app, r#"[{"kind": "data", "param": "nope", "selector": "all", "op": "set", "value": 1}]"#).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["patch"], 0);
    let bad_constraint = json!([{"kind": "struct", "action": "add_constraint", "name": "extra",
        "constraint": {"domain": ["Shipments"], "expression": {"type": "variable", "name": "y", "indices": ["i"]}, "sense": "<=", "rhs": {"type": "constant", "value": 1}}}]);
    let (s, body) = post(&app, &bad_constraint.to_string()).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!body["report"]["errors"].as_array().unwrap().is_empty());

    assert_eq!(post(&app, r#"{"id": "mine", "patches": []}"#).await.0, StatusCode::OK);
    assert_eq!(post(&app, r#"{"id": "mine", "patches": []}"#).await.0, StatusCode::CONFLICT);

    assert_eq!(get(&app, "/scenario/unknown").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/scenario/unknown/solution").await.0, StatusCode::NOT_FOUND);
    // failed scenarios are not registered
    assert_eq!(get(&app, "/scenarios").await.1.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn concurrent_scenarios_are_isolated_and_deterministic() {
    let app = app();
    let body = r#"[{"kind": "struct", "action": "remove_constraint", "name": "carrier_capacity_constraint"}]"#;
    let tasks: Vec<_> = (0..8).map(|_| {
        let app = app.clone();
        tokio::spawn(async move { post(&app, body).await })
    }).collect();
    let mut ids = std::collections::BTreeSet::new();
    let mut diffs = Vec::new();
    for t in tasks {
        let (s, r) = t.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        ids.insert(r["id"].as_str().unwrap().to_string());
        diffs.push(r["diff"].clone());
    }
    assert_eq!(ids.len(), 8);
    assert!(diffs.windows(2).all(|w| w[0] == w[1]));
    let base = get(&app, "/solution").await.1["objective"].as_f64().unwrap();
    assert!(diffs[0]["new_objective"].as_f64().unwrap() >= base - REL_TOL * base);
}
