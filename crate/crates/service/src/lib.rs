//! HTTP interface over a trained model artifact.
//!
//! The artifact is loaded once and shared read-only between requests. Every
//! JSON response carries `schema_version`. Randomized explainers are seeded
//! from the `x-seed` header, falling back to a fixed default.

pub mod error;
mod openapi;
mod record;

pub use error::ApiError;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, HeaderValue};
use axum::routing::{get, post};
use axum::{Json, Router};
use nephro_xai::attribution::{self, LimeOptions};
use nephro_xai::counterfactual::{self, CounterfactualOptions};
use nephro_xai::models::ModelArtifact;
use nephro_xai::{ckd, Predictor};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_HEADER: &str = "x-seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// When set, startup fails unless the artifact was trained on this schema.
    pub expected_fingerprint: Option<String>,
    /// Allowed browser origins; empty allows any.
    pub cors_origins: Vec<String>,
    pub default_seed: u64,
    pub lime_samples: usize,
    pub permutations: usize,
    pub counterfactual_budget: usize,
    pub counterfactual_k: usize,
    pub immutables: Vec<String>,
    pub effect_features: Vec<String>,
    pub global_rows: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            expected_fingerprint: None,
            cors_origins: Vec::new(),
            default_seed: 42,
            lime_samples: 2000,
            permutations: 512,
            counterfactual_budget: 2000,
            counterfactual_k: 5,
            immutables: ckd::DEFAULT_IMMUTABLES.iter().map(|s| s.to_string()).collect(),
            effect_features: vec!["hemo".into(), "sc".into()],
            global_rows: 50,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("cannot load model artifact: {0}")]
    Artifact(#[from] nephro_xai::Error),
    #[error("schema fingerprint mismatch: artifact has {found}, expected {expected}")]
    Fingerprint { expected: String, found: String },
    #[error("invalid CORS origin `{0}`")]
    Origin(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    artifact: ModelArtifact,
    config: ServiceConfig,
    global: OnceLock<Value>,
}

impl AppState {
    pub fn new(artifact: ModelArtifact, config: ServiceConfig) -> Result<Self, StartupError> {
        if let Some(expected) = &config.expected_fingerprint {
            if *expected != artifact.schema_fingerprint {
                return Err(StartupError::Fingerprint {
                    expected: expected.clone(),
                    found: artifact.schema_fingerprint.clone(),
                });
            }
        }
        Ok(Self {
            inner: Arc::new(Inner {
                artifact,
                config,
                global: OnceLock::new(),
            }),
        })
    }

    pub fn load(path: impl AsRef<Path>, config: ServiceConfig) -> Result<Self, StartupError> {
        Self::new(ModelArtifact::load(path)?, config)
    }

    pub fn artifact(&self) -> &ModelArtifact {
        &self.inner.artifact
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }
}

pub fn router(state: AppState) -> Result<Router, StartupError> {
    let origins = &state.config().cors_origins;
    let cors = if origins.is_empty() {
        CorsLayer::new().allow_origin(Any)
    } else {
        let list = origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| StartupError::Origin(o.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        CorsLayer::new().allow_origin(AllowOrigin::list(list))
    }
    .allow_methods(Any)
    .allow_headers(Any);
    Ok(Router::new()
        .route("/model/meta", get(meta))
        .route("/predict", post(predict))
        .route("/explain", post(explain))
        .route("/counterfactual", post(counterfactual_handler))
        .route("/global", get(global))
        .route("/openapi.json", get(openapi::document))
        .layer(cors)
        .with_state(state))
}

pub async fn serve(addr: SocketAddr, state: AppState) -> Result<(), StartupError> {
    let app = router(state)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn seed_from(headers: &HeaderMap, default: u64) -> Result<u64, ApiError> {
    match headers.get(SEED_HEADER) {
        None => Ok(default),
        Some(v) => v
            .to_str()
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| ApiError::bad_request(format!("{SEED_HEADER} must be an unsigned integer"))),
    }
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn prediction(artifact: &ModelArtifact, row: &[f64]) -> Value {
    let p = artifact.model.predict_proba(row);
    let class = usize::from(p[1] > p[0]);
    json!({
        "predicted_class": class,
        "label": artifact.class_names[class],
        "probabilities": p,
        "probability": p[class],
    })
}

async fn meta(State(state): State<AppState>) -> Json<Value> {
    let a = state.artifact();
    let features: Vec<Value> = a
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let s = &a.feature_stats[j];
            json!({
                "name": name,
                "unit": ckd::unit(name),
                "kind": a.feature_kinds[j],
                "plausible_range": s.plausible,
                "median": s.median,
                "min": s.min,
                "max": s.max,
            })
        })
        .collect();
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "family": a.spec.family(),
        "features": features,
        "class_names": a.class_names,
        "cv_metrics": a.cv_metrics,
        "schema_fingerprint": a.schema_fingerprint,
        "immutables": state.config().immutables,
    }))
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let body = record::parse_body(&body)?;
    let a = state.artifact();
    record::check_fingerprint(&body, a)?;
    let row = record::parse_record(&body, a)?;
    let mut out = prediction(a, &row);
    out["schema_version"] = json!(SCHEMA_VERSION);
    Ok(Json(out))
}

async fn explain(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Json<Value>, ApiError> {
    let seed = seed_from(&headers, state.config().default_seed)?;
    let body = record::parse_body(&body)?;
    record::check_fingerprint(&body, state.artifact())?;
    let row = record::parse_record(&body, state.artifact())?;
    blocking(move || {
        let a = state.artifact();
        let cfg = state.config();
        let class = ckd::CKD;
        let lime = attribution::lime_explain(
            &a.model,
            &row,
            &a.background_matrix(),
            class,
            &LimeOptions {
                n_samples: cfg.lime_samples,
                ..Default::default()
            },
            seed,
        )?;
        let shapley = if row.len() <= 10 {
            attribution::shapley_exact(&a.model, &row, &a.background, class)?
        } else {
            attribution::shapley_sampled(&a.model, &row, &a.background, cfg.permutations, seed, class)?
        };
        Ok(Json(json!({
            "schema_version": SCHEMA_VERSION,
            "prediction": prediction(a, &row),
            "explained_class": a.class_names[class],
            "lime": lime,
            "shapley": shapley,
            "efficiency_gap": shapley.efficiency_gap(),
        })))
    })
    .await
}

fn target_class(body: &serde_json::Map<String, Value>, a: &ModelArtifact, row: &[f64]) -> Result<usize, ApiError> {
    match body.get("target_class") {
        None | Some(Value::Null) => Ok(1 - a.model.predict(row)),
        Some(Value::Number(n)) => match n.as_u64() {
            Some(c) if (c as usize) < a.class_names.len() => Ok(c as usize),
            _ => Err(ApiError::unprocessable("target_class is out of range", Some("target_class"))),
        },
        Some(Value::String(s)) => a
            .class_names
            .iter()
            .position(|c| c == s)
            .ok_or_else(|| ApiError::unprocessable(format!("unknown class `{s}`"), Some("target_class"))),
        Some(_) => Err(ApiError::bad_field("target_class", "target_class must be an index or a class name")),
    }
}

async fn counterfactual_handler(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let seed = seed_from(&headers, state.config().default_seed)?;
    let body = record::parse_body(&body)?;
    let a = state.artifact();
    record::check_fingerprint(&body, a)?;
    let row = record::parse_record(&body, a)?;
    let target = target_class(&body, a, &row)?;
    let immutables = record::string_list(&body, "immutables")?.unwrap_or_else(|| state.config().immutables.clone());
    let k = match body.get("k") {
        None | Some(Value::Null) => state.config().counterfactual_k,
        Some(v) => v
            .as_u64()
            .filter(|k| (1..=50).contains(k))
            .ok_or_else(|| ApiError::unprocessable("k must be an integer in 1..=50", Some("k")))? as usize,
    };
    blocking(move || {
        let a = state.artifact();
        let opts = CounterfactualOptions {
            k,
            budget: state.config().counterfactual_budget,
            immutables,
            ..Default::default()
        };
        let set = counterfactual::counterfactual_search(&a.model, &row, target, &a.background_matrix(), &opts, seed)?;
        let mut out = serde_json::to_value(&set).map_err(ApiError::internal)?;
        out["schema_version"] = json!(SCHEMA_VERSION);
        out["table"] = json!(set.to_table(&a.class_names));
        Ok(Json(out))
    })
    .await
}

fn compute_global(state: &AppState) -> Result<Value, ApiError> {
    let a = state.artifact();
    let cfg = state.config();
    let class = ckd::CKD;
    let rows: Vec<Vec<f64>> = a.background.iter().take(cfg.global_rows).cloned().collect();
    let bg: Vec<Vec<f64>> = a.background.iter().take(50).cloned().collect();
    let g = attribution::global_shapley(&a.model, &rows, &bg, &a.feature_names, class, cfg.permutations, cfg.default_seed)?;
    let data = a.background_matrix();
    let mut pdp = Vec::new();
    let mut ale = Vec::new();
    for f in &cfg.effect_features {
        let Some(j) = a.feature_index(f) else { continue };
        if a.feature_kinds[j].is_nominal() {
            continue;
        }
        pdp.push(attribution::pdp(&a.model, &data, &[j], attribution::DEFAULT_GRID_SIZE, class)?);
        ale.push(attribution::ale(&a.model, &data, j, attribution::DEFAULT_ALE_BINS, class)?);
    }
    let ranking: Vec<&str> = g.ranking().into_iter().map(|j| a.feature_names[j].as_str()).collect();
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "explained_class": a.class_names[class],
        "feature_names": a.feature_names,
        "mean_abs_phi": g.mean_abs_phi,
        "ranking": ranking,
        "pdp": pdp,
        "ale": ale,
    }))
}

async fn global(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    if let Some(v) = state.inner.global.get() {
        return Ok(Json(v.clone()));
    }
    let s = state.clone();
    let v = blocking(move || compute_global(&s)).await?;
    let _ = state.inner.global.set(v.clone());
    Ok(Json(v))
}
