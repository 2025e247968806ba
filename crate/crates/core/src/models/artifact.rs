//! Versioned JSON document bundling a trained model with what explainers and
//! the service need at inference time.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec, Predictor};
use crate::resampling::Metrics;
use crate::stats;
use crate::tabular::{FeatureKind, FeatureMatrix};
use crate::{Error, Result};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub mad: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
    /// Values outside this range are rejected by the service.
    pub plausible: Option<[f64; 2]>,
}

impl FeatureStats {
    pub fn from_column(name: &str, column: &[f64]) -> Self {
        let sorted = stats::sorted(column);
        Self {
            name: name.to_string(),
            mean: stats::mean(column),
            std: stats::std_dev(column),
            median: stats::quantile_sorted(&sorted, 0.5),
            mad: stats::mad(column),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            q1: stats::quantile_sorted(&sorted, 0.25),
            q3: stats::quantile_sorted(&sorted, 0.75),
            plausible: crate::ckd::plausible_range(name).map(|(a, b)| [a, b]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub model: Model,
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    pub class_names: Vec<String>,
    pub schema_fingerprint: String,
    /// Seeded sample of training rows used as the explainer background.
    pub background: Vec<Vec<f64>>,
    pub feature_stats: Vec<FeatureStats>,
    pub cv_metrics: Option<Metrics>,
}

impl ModelArtifact {
    pub fn new(
        spec: ModelSpec,
        model: Model,
        training: &FeatureMatrix,
        schema_fingerprint: impl Into<String>,
        background_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if model.n_features() != training.n_features() {
            return Err(Error::invalid("model and training data disagree on feature count"));
        }
        let n = training.n_rows();
        let take = background_size.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, take).into_vec();
        idx.sort_unstable();
        let background = idx.iter().map(|&i| training.rows[i].clone()).collect();
        let feature_stats = training
            .names
            .iter()
            .enumerate()
            .map(|(j, name)| FeatureStats::from_column(name, &training.column(j)))
            .collect();
        Ok(Self {
            format_version: ARTIFACT_VERSION,
            spec,
            model,
            feature_names: training.names.clone(),
            feature_kinds: training.kinds.clone(),
            class_names: training.class_names.clone(),
            schema_fingerprint: schema_fingerprint.into(),
            background,
            feature_stats,
            cv_metrics: None,
        })
    }

    pub fn with_cv_metrics(mut self, m: Metrics) -> Self {
        self.cv_metrics = Some(m);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let version = v.get("format_version").and_then(|x| x.as_u64());
        if version != Some(ARTIFACT_VERSION as u64) {
            return Err(Error::invalid(format!(
                "unsupported artifact format version {version:?}, expected {ARTIFACT_VERSION}"
            )));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Column medians of the background.
    pub fn background_medians(&self) -> Vec<f64> {
        (0..self.feature_names.len())
            .map(|j| stats::median(&self.background.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect()
    }

    pub fn background_matrix(&self) -> FeatureMatrix {
        FeatureMatrix {
            names: self.feature_names.clone(),
            kinds: self.feature_kinds.clone(),
            rows: self.background.clone(),
            labels: vec![0; self.background.len()],
            class_names: self.class_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train, Family};

    #[test]
    fn round_trip_preserves_predictions() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, (i % 5) as f64]).collect();
        let labels: Vec<usize> = (0..60).map(|i| usize::from(i % 3 == 0 || i > 40)).collect();
        let data = FeatureMatrix::numeric(&["hemo", "b"], rows, labels).unwrap();
        for fam in [Family::Rf, Family::Lr, Family::Gbm, Family::Nb] {
            let spec = ModelSpec::default_for(fam, 4);
            let model = train(&spec, &data).unwrap();
            let art = ModelArtifact::new(spec, model, &data, "fp", 20, 1).unwrap();
            assert_eq!(art.background.len(), 20);
            assert_eq!(art.feature_stats[0].plausible, Some([1.0, 25.0]));
            let back = ModelArtifact::from_json(&art.to_json().unwrap()).unwrap();
            for r in &data.rows {
                assert_eq!(back.model.predict_proba(r), art.model.predict_proba(r));
            }
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let s = r#"{"format_version": 99}"#;
        assert!(ModelArtifact::from_json(s).is_err());
    }
}
