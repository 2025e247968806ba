use nephro_xai::models::ModelArtifact;
use nephro_xai::FeatureKind;
use serde_json::{Map, Value};

use crate::error::ApiError;

pub fn parse_body(bytes: &[u8]) -> Result<Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(bytes) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::bad_request("request body must be a JSON object")),
        Err(e) => Err(ApiError::bad_request(format!("malformed JSON: {e}"))),
    }
}

/// Checks the optional fingerprint against the served model.
pub fn check_fingerprint(body: &Map<String, Value>, artifact: &ModelArtifact) -> Result<(), ApiError> {
    match body.get("schema_fingerprint") {
        None | Some(Value::Null) => Ok(()),
        Some(Value::String(f)) if *f == artifact.schema_fingerprint => Ok(()),
        Some(Value::String(f)) => Err(ApiError::conflict(format!(
            "schema fingerprint {f} does not match the served model ({})",
            artifact.schema_fingerprint
        ))),
        Some(_) => Err(ApiError::bad_field("schema_fingerprint", "schema_fingerprint must be a string")),
    }
}

/// Reads `body.record` into model column order, validating presence and ranges.
pub fn parse_record(body: &Map<String, Value>, artifact: &ModelArtifact) -> Result<Vec<f64>, ApiError> {
    let record = match body.get("record") {
        Some(Value::Object(r)) => r,
        Some(_) => return Err(ApiError::bad_field("record", "record must be an object")),
        None => return Err(ApiError::bad_field("record", "missing field `record`")),
    };
    if let Some(extra) = record.keys().find(|k| artifact.feature_index(k).is_none()) {
        return Err(ApiError::bad_field(extra, format!("unknown feature `{extra}`")));
    }
    let mut row = Vec::with_capacity(artifact.feature_names.len());
    for (j, name) in artifact.feature_names.iter().enumerate() {
        let v = match record.get(name) {
            None | Some(Value::Null) => {
                return Err(ApiError::bad_field(name, format!("missing feature `{name}`")));
            }
            Some(v) => v
                .as_f64()
                .ok_or_else(|| ApiError::bad_field(name, format!("feature `{name}` must be a number")))?,
        };
        if let Some([lo, hi]) = artifact.feature_stats[j].plausible {
            if v < lo || v > hi {
                return Err(ApiError::unprocessable(
                    format!("`{name}` = {v} is outside the plausible range [{lo}, {hi}]"),
                    Some(name),
                ));
            }
        }
        if let FeatureKind::Nominal { levels } = &artifact.feature_kinds[j] {
            if !levels.contains(&v) {
                return Err(ApiError::unprocessable(
                    format!("`{name}` = {v} is not one of {levels:?}"),
                    Some(name),
                ));
            }
        }
        row.push(v);
    }
    Ok(row)
}

/// Feature names from an optional string array field.
pub fn string_list(body: &Map<String, Value>, key: &str) -> Result<Option<Vec<String>>, ApiError> {
    match body.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| ApiError::bad_field(key, format!("`{key}` must be an array of strings")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(_) => Err(ApiError::bad_field(key, format!("`{key}` must be an array of strings"))),
    }
}
