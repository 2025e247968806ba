use axum::Json;
use serde_json::{json, Value};

use crate::{SCHEMA_VERSION, SEED_HEADER};

fn error_responses() -> Value {
    json!({
        "400": { "description": "malformed JSON or a missing or non-numeric feature; `error.field` names it" },
        "409": { "description": "schema_fingerprint does not match the served model" },
        "422": { "description": "value outside its plausible range, unknown level, or no counterfactual; `error.field` names the field when there is one" },
        "500": { "description": "internal error; `error.id` identifies the log entry" }
    })
}

fn record_body(extra: Value) -> Value {
    let mut props = json!({
        "record": { "type": "object", "additionalProperties": { "type": "number" } },
        "schema_fingerprint": { "type": "string" }
    });
    if let (Some(p), Some(e)) = (props.as_object_mut(), extra.as_object()) {
        p.extend(e.clone());
    }
    json!({
        "required": true,
        "content": { "application/json": { "schema": {
            "type": "object",
            "required": ["record"],
            "properties": props
        }}}
    })
}

pub async fn document() -> Json<Value> {
    let seed = json!([{
        "name": SEED_HEADER,
        "in": "header",
        "required": false,
        "schema": { "type": "integer", "minimum": 0 }
    }]);
    Json(json!({
        "openapi": "3.0.3",
        "schema_version": SCHEMA_VERSION,
        "info": { "title": "nephro-xai explanation service", "version": env!("CARGO_PKG_VERSION") },
        "paths": {
            "/model/meta": { "get": {
                "summary": "Model family, features with units and plausible ranges, CV metrics",
                "responses": { "200": { "description": "model metadata" } }
            }},
            "/predict": { "post": {
                "summary": "Class and probability pair for one record",
                "requestBody": record_body(json!({})),
                "responses": { "200": { "description": "prediction" } }
            }},
            "/explain": { "post": {
                "summary": "Local surrogate weights and Shapley values for one record",
                "parameters": seed,
                "requestBody": record_body(json!({})),
                "responses": { "200": { "description": "explanation" } }
            }},
            "/counterfactual": { "post": {
                "summary": "Nearby records predicted as the target class",
                "parameters": seed,
                "requestBody": record_body(json!({
                    "target_class": { "oneOf": [{ "type": "integer" }, { "type": "string" }] },
                    "immutables": { "type": "array", "items": { "type": "string" } },
                    "k": { "type": "integer", "minimum": 1, "maximum": 50 }
                })),
                "responses": { "200": { "description": "counterfactual set" } }
            }},
            "/global": { "get": {
                "summary": "Mean |Shapley| ranking with PDP and ALE grids",
                "responses": { "200": { "description": "global effects" } }
            }}
        },
        "x-error-responses": error_responses()
    }))
}
