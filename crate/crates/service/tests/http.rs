use std::path::PathBuf;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::response::IntoResponse;
use axum::Router;
use http_body_util::BodyExt;
use nephro_xai_service::error::ApiError;
use nephro_xai_service::{router, AppState, ServiceConfig, SCHEMA_VERSION, SEED_HEADER};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/reference_model.json")
}

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::load(fixture(), config).expect("fixture loads")).expect("router")
}

fn app() -> Router {
    app_with(ServiceConfig {
        lime_samples: 500,
        counterfactual_budget: 600,
        global_rows: 10,
        ..Default::default()
    })
}

fn patient() -> Value {
    json!({ "hemo": 9.1, "sc": 3.2, "al": 3, "htn": 1, "dm": 1, "age": 61 })
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::Null)
    };
    (status, headers, body)
}

fn post(path: &str, body: impl Into<Body>) -> Request<Body> {
    Request::builder()
        .method(Method::POST)
        .uri(path)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.into())
        .unwrap()
}

fn post_json(path: &str, body: Value) -> Request<Body> {
    post(path, body.to_string())
}

fn get(path: &str) -> Request<Body> {
    Request::get(path).body(Body::empty()).unwrap()
}

#[tokio::test]
async fn reference_patient_is_predicted_ckd() {
    let (status, _, body) = send(&app(), post_json("/predict", json!({ "record": patient() }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["label"], "ckd");
    assert_eq!(body["predicted_class"], 0);
    assert!(body["probability"].as_f64().unwrap() > 0.5);
    let p = body["probabilities"].as_array().unwrap();
    let total: f64 = p.iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(body["schema_version"], SCHEMA_VERSION);
}

#[tokio::test]
async fn missing_feature_is_400_naming_it() {
    let mut rec = patient();
    rec.as_object_mut().unwrap().remove("sc");
    let (status, _, body) = send(&app(), post_json("/predict", json!({ "record": rec }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["field"], "sc");
    assert_eq!(body["error"]["status"], 400);
}

#[tokio::test]
async fn non_numeric_feature_is_400() {
    let mut rec = patient();
    rec["hemo"] = json!("low");
    let (status, _, body) = send(&app(), post_json("/predict", json!({ "record": rec }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["field"], "hemo");
}

#[tokio::test]
async fn implausible_value_is_422_naming_it() {
    let mut rec = patient();
    rec["hemo"] = json!(40.0);
    let (status, _, body) = send(&app(), post_json("/predict", json!({ "record": rec }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["field"], "hemo");

    let mut rec = patient();
    rec["htn"] = json!(0.5);
    let (status, _, body) = send(&app(), post_json("/predict", json!({ "record": rec }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["field"], "htn");
}

#[tokio::test]
async fn malformed_json_is_400() {
    let (status, _, body) = send(&app(), post("/predict", "{\"record\": {")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["schema_version"], SCHEMA_VERSION);
    let (status, _, _) = send(&app(), post("/explain", "[1, 2]")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn fingerprint_mismatch_is_409() {
    let req = json!({ "record": patient(), "schema_fingerprint": "0000" });
    let (status, _, body) = send(&app(), post_json("/predict", req)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["status"], 409);

    let (_, _, meta) = send(&app(), get("/model/meta")).await;
    let req = json!({ "record": patient(), "schema_fingerprint": meta["schema_fingerprint"] });
    let (status, _, _) = send(&app(), post_json("/predict", req)).await;
    assert_eq!(status, StatusCode::OK);
}

#[test]
fn startup_rejects_an_unexpected_fingerprint() {
    let cfg = ServiceConfig {
        expected_fingerprint: Some("not-this-schema".into()),
        ..Default::default()
    };
    assert!(AppState::load(fixture(), cfg).is_err());
}

#[tokio::test]
async fn explanation_satisfies_efficiency() {
    let (status, _, body) = send(&app(), post_json("/explain", json!({ "record": patient() }))).await;
    assert_eq!(status, StatusCode::OK);
    let gap = body["efficiency_gap"].as_f64().unwrap();
    assert!(gap.abs() <= 0.02, "gap {gap}");
    let phi = body["shapley"]["phi"].as_array().unwrap();
    assert_eq!(phi.len(), 6);
    assert_eq!(body["lime"]["entries"].as_array().unwrap().len(), 6);
    assert_eq!(body["explained_class"], "ckd");
}

#[tokio::test]
async fn seed_header_makes_explanations_repeatable() {
    let app = app();
    let req = |seed: &str| {
        let mut r = post_json("/explain", json!({ "record": patient() }));
        r.headers_mut().insert(SEED_HEADER, seed.parse().unwrap());
        r
    };
    let (_, _, a) = send(&app, req("17")).await;
    let (_, _, b) = send(&app, req("17")).await;
    let (_, _, c) = send(&app, req("18")).await;
    assert_eq!(a["lime"], b["lime"]);
    assert_ne!(a["lime"], c["lime"]);
    let (status, _, _) = send(&app, req("minus one")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn counterfactual_reaches_the_other_class() {
    let req = json!({ "record": patient(), "target_class": "notckd", "k": 3 });
    let (status, _, body) = send(&app(), post_json("/counterfactual", req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let cfs = body["counterfactuals"].as_array().unwrap();
    assert!(!cfs.is_empty() && cfs.len() <= 3);
    for cf in cfs {
        assert_eq!(cf["predicted_class"], 1);
        assert_eq!(cf["row"][4], 61.0, "age is immutable by default");
    }
    assert!(body["table"].as_str().unwrap().contains("notckd"));
}

#[tokio::test]
async fn all_features_immutable_is_422() {
    let all = ["hemo", "sc", "al", "htn", "age", "dm"];
    let req = json!({ "record": patient(), "target_class": 1, "immutables": all });
    let (status, _, body) = send(&app(), post_json("/counterfactual", req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"]["message"].as_str().unwrap().contains("no mutable features"));

    let req = json!({ "record": patient(), "immutables": ["potassium"] });
    let (status, _, body) = send(&app(), post_json("/counterfactual", req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["field"], "potassium");
}

#[tokio::test]
async fn meta_global_and_openapi_carry_the_schema_version() {
    let app = app();
    let (status, _, meta) = send(&app, get("/model/meta")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(meta["schema_version"], SCHEMA_VERSION);
    assert_eq!(meta["family"], "rf");
    let hemo = &meta["features"][0];
    assert_eq!(hemo["name"], "hemo");
    assert_eq!(hemo["unit"], "g/dL");
    assert_eq!(hemo["plausible_range"], json!([1.0, 25.0]));

    let (status, _, doc) = send(&app, get("/openapi.json")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["schema_version"], SCHEMA_VERSION);
    for path in ["/model/meta", "/predict", "/explain", "/counterfactual", "/global"] {
        assert!(doc["paths"].get(path).is_some(), "{path}");
    }

    let (status, _, g) = send(&app, get("/global")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(g["schema_version"], SCHEMA_VERSION);
    assert_eq!(g["ranking"].as_array().unwrap().len(), 6);
    assert_eq!(g["pdp"].as_array().unwrap().len(), 2);
    let (_, _, again) = send(&app, get("/global")).await;
    assert_eq!(g, again);
}

#[tokio::test]
async fn cors_headers_follow_the_configured_origin() {
    let app = app_with(ServiceConfig {
        cors_origins: vec!["http://localhost:5173".into()],
        ..Default::default()
    });
    let req = Request::get("/model/meta")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = send(&app, req).await;
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");

    let req = Request::get("/model/meta")
        .header(header::ORIGIN, "http://evil.example")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = send(&app, req).await;
    assert!(headers.get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}

#[tokio::test]
async fn internal_errors_hide_the_cause_behind_an_id() {
    let resp = ApiError::internal("database on fire").into_response();
    assert_eq!(resp.status(), StatusCode::INTERNAL_SERVER_ERROR);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(body["error"]["status"], 500);
    assert!(body["error"]["id"].as_str().is_some_and(|id| id.len() == 36));
    assert!(!body.to_string().contains("fire"));
}
