//! Interpretability and fidelity scoring for trained models.
//!
//! `I` counts redundant features: `(d_total - n_important) / d_total`. A model
//! that leans on fewer features scores higher. `d_total` defaults to the full
//! pre-selection width even when models train on fewer columns.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::attribution::{global_shapley, lime_explain, LimeOptions};
use crate::models::{DecisionTree, TreeParams};
use crate::models::Predictor;
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

pub const DEFAULT_CUTOFF: f64 = 0.90;
pub const DEFAULT_D_TOTAL: usize = 24;
pub const SURROGATE_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub importance: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportantFeatureSet {
    pub cutoff: f64,
    /// Normalized importances, descending.
    pub ranked: Vec<RankedFeature>,
    /// Minimal prefix of `ranked` reaching the cutoff.
    pub members: Vec<String>,
}

impl ImportantFeatureSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn cumulative(&self) -> f64 {
        self.ranked.get(self.members.len().saturating_sub(1)).map_or(0.0, |r| r.cumulative)
    }
}

pub fn important_set(names: &[String], importances: &[f64], cutoff: f64) -> Result<ImportantFeatureSet> {
    if names.len() != importances.len() {
        return Err(Error::invalid("names and importances differ in length"));
    }
    if !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(Error::invalid("cutoff must lie in (0, 1]"));
    }
    if importances.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("importances must be finite and non-negative"));
    }
    let total: f64 = importances.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("importances are all zero"));
    }
    let order = crate::stats::argsort_desc(importances);
    let mut cum = 0.0;
    let mut ranked = Vec::with_capacity(order.len());
    let mut members = Vec::new();
    let mut reached = false;
    for j in order {
        let v = importances[j] / total;
        cum += v;
        ranked.push(RankedFeature {
            feature: names[j].clone(),
            importance: v,
            cumulative: cum,
        });
        if !reached {
            members.push(names[j].clone());
            reached = cum >= cutoff - 1e-12;
        }
    }
    Ok(ImportantFeatureSet { cutoff, ranked, members })
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid("vectors differ in length"));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn interpretability_score(n_important: usize, d_total: usize) -> Result<f64> {
    if n_important == 0 || n_important > d_total {
        return Err(Error::invalid(format!(
            "need 0 < n_important <= d_total, got {n_important} of {d_total}"
        )));
    }
    Ok((d_total - n_important) as f64 / d_total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision is the share of the true set recovered, recall the share of the
/// explanation set that is true.
pub fn external_fidelity<S: AsRef<str>>(true_set: &[S], explanation_set: &[S]) -> Result<Fidelity> {
    if true_set.is_empty() || explanation_set.is_empty() {
        return Err(Error::invalid("fidelity needs non-empty feature sets"));
    }
    let t: BTreeSet<&str> = true_set.iter().map(|s| s.as_ref()).collect();
    let e: BTreeSet<&str> = explanation_set.iter().map(|s| s.as_ref()).collect();
    let common = t.intersection(&e).count() as f64;
    let precision = common / t.len() as f64;
    let recall = common / e.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Fidelity { precision, recall, f1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeIndices {
    pub fii: f64,
    pub facc: f64,
}

pub fn composite_indices(f1: f64, interpretability: f64, accuracy: f64) -> CompositeIndices {
    CompositeIndices {
        fii: f1 * interpretability,
        facc: f1 * accuracy,
    }
}

/// Half-up rounding to two decimals for display.
pub fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5 + 1e-9).floor() / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationExplainer {
    #[default]
    Lime,
    Shapley,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsOptions {
    pub cutoff: f64,
    pub d_total: usize,
    pub surrogate_depth: usize,
    pub explainer: ValidationExplainer,
    /// Rows explained when building the validation vector.
    pub n_explain: usize,
    pub lime_samples: usize,
    pub background_size: usize,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            d_total: DEFAULT_D_TOTAL,
            surrogate_depth: SURROGATE_DEPTH,
            explainer: ValidationExplainer::Lime,
            n_explain: 20,
            lime_samples: 1000,
            background_size: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilityReport {
    pub model: String,
    pub d_total: usize,
    pub n_important: usize,
    pub interpretability: f64,
    pub true_features: Vec<String>,
    pub explanation_features: Vec<String>,
    pub fidelity: Fidelity,
    pub cosine: Option<f64>,
    pub explainer: Option<ValidationExplainer>,
    pub accuracy: f64,
    pub fii: f64,
    pub facc: f64,
    pub notes: Vec<String>,
}

/// Builds a report from already-known sets and counts.
pub fn report_from_sets<S: AsRef<str>>(
    model: &str,
    n_important: usize,
    true_features: &[S],
    explanation_features: &[S],
    accuracy: f64,
    d_total: usize,
) -> Result<InterpretabilityReport> {
    let interpretability = interpretability_score(n_important, d_total)?;
    let fidelity = external_fidelity(true_features, explanation_features)?;
    let c = composite_indices(fidelity.f1, interpretability, accuracy);
    Ok(InterpretabilityReport {
        model: model.to_string(),
        d_total,
        n_important,
        interpretability,
        true_features: true_features.iter().map(|s| s.as_ref().to_string()).collect(),
        explanation_features: explanation_features.iter().map(|s| s.as_ref().to_string()).collect(),
        fidelity,
        cosine: None,
        explainer: None,
        accuracy,
        fii: c.fii,
        facc: c.facc,
        notes: Vec::new(),
    })
}

/// Validation vector: mean absolute local weight per feature.
fn validation_vector<P: Predictor + ?Sized>(
    model: &P,
    test: &FeatureMatrix,
    opts: &MetricsOptions,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = test.n_features();
    let n = opts.n_explain.min(test.n_rows()).max(1);
    let step = (test.n_rows() / n).max(1);
    let rows: Vec<Vec<f64>> = test.rows.iter().step_by(step).take(n).cloned().collect();
    match opts.explainer {
        ValidationExplainer::Lime => {
            let lo = LimeOptions {
                n_samples: opts.lime_samples,
                ..Default::default()
            };
            let mut acc = vec![0.0; d];
            for (i, r) in rows.iter().enumerate() {
                let e = lime_explain(model, r, test, 0, &lo, seed.wrapping_add(i as u64))?;
                for (a, w) in acc.iter_mut().zip(e.weights()) {
                    *a += w.abs();
                }
            }
            Ok(acc.into_iter().map(|a| a / rows.len() as f64).collect())
        }
        ValidationExplainer::Shapley => {
            let bstep = (test.n_rows() / opts.background_size.max(1)).max(1);
            let bg: Vec<Vec<f64>> = test.rows.iter().step_by(bstep).take(opts.background_size).cloned().collect();
            Ok(global_shapley(model, &rows, &bg, &test.names, 0, 256, seed)?.mean_abs_phi)
        }
    }
}

/// Scores one model on held-out data: the true set comes from the model's own
/// importances, the explanation set from a shallow tree mimicking its labels.
pub fn score_model<P: Predictor + ?Sized>(
    name: &str,
    model: &P,
    test: &FeatureMatrix,
    accuracy: f64,
    opts: &MetricsOptions,
    seed: u64,
) -> Result<InterpretabilityReport> {
    if test.n_rows() == 0 {
        return Err(Error::InsufficientData("no test rows".into()));
    }
    let importances = model.feature_importances();
    let truth = important_set(&test.names, &importances, opts.cutoff)?;

    let mut mimic = test.clone();
    mimic.labels = test.rows.iter().map(|r| model.predict(r)).collect();
    let tree = DecisionTree::fit(&TreeParams::with_depth(opts.surrogate_depth), &mimic)?;
    let surrogate_imp = tree.feature_importances();
    if surrogate_imp.iter().all(|v| *v == 0.0) {
        return Err(Error::InsufficientData(format!(
            "{name} predicts a single class on the test rows; the surrogate tree has no splits"
        )));
    }
    let explanation = important_set(&test.names, &surrogate_imp, opts.cutoff)?;

    let mut report = report_from_sets(
        name,
        truth.len(),
        &truth.members,
        &explanation.members,
        accuracy,
        opts.d_total,
    )?;
    let v = validation_vector(model, test, opts, seed)?;
    report.cosine = cosine_similarity(&importances, &v).ok();
    report.explainer = Some(opts.explainer);
    if opts.d_total != test.n_features() {
        report.notes.push(format!(
            "I uses d_total = {} while the model sees {} features",
            opts.d_total,
            test.n_features()
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub rows: Vec<InterpretabilityReport>,
}

impl Scorecard {
    /// Model x {I, F, FII, FAcc, cosine}, rounded half-up to two decimals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>6} {:>6} {:>6} {:>6} {:>7}\n",
            "model", "I", "F", "FII", "FAcc", "cosine"
        );
        for r in &self.rows {
            let cos = r.cosine.map_or("-".to_string(), |c| format!("{:.2}", round2(c)));
            out.push_str(&format!(
                "{:<16} {:>6.2} {:>6.2} {:>6.2} {:>6.2} {:>7}\n",
                r.model,
                round2(r.interpretability),
                round2(r.fidelity.f1),
                round2(r.fii),
                round2(r.facc),
                cos
            ));
        }
        out
    }
}

/// Known sets and accuracies to score without trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorecardFixture {
    #[serde(default = "default_d_total")]
    pub d_total: usize,
    pub model: Vec<FixtureModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureModel {
    pub name: String,
    pub n_important: usize,
    pub true_features: Vec<String>,
    pub explanation_features: Vec<String>,
    pub accuracy: f64,
}

fn default_d_total() -> usize {
    DEFAULT_D_TOTAL
}

impl ScorecardFixture {
    pub fn scorecard(&self) -> Result<Scorecard> {
        let rows = self
            .model
            .iter()
            .map(|m| {
                report_from_sets(
                    &m.name,
                    m.n_important,
                    &m.true_features,
                    &m.explanation_features,
                    m.accuracy,
                    self.d_total,
                )
            })
            .collect::<Result<_>>()?;
        Ok(Scorecard { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cumulative_prefix() {
        let n = names(&["hemo", "al", "dm", "sc", "age"]);
        let s = important_set(&n, &[0.788874, 0.114317, 0.049884, 0.034721, 0.012204], 0.9).unwrap();
        assert_eq!(s.members, names(&["hemo", "al"]));
        assert!((s.cumulative() - 0.903191).abs() < 1e-6);
        assert_eq!(important_set(&n[..4], &[1.0; 4], 0.9).unwrap().len(), 4);
        assert_eq!(important_set(&n, &[0.0, 0.0, 3.0, 0.0, 0.0], 0.9).unwrap().members, names(&["dm"]));
        assert!(important_set(&n, &[0.0; 5], 0.9).is_err());
    }

    #[test]
    fn fidelity_and_interpretability() {
        let f = external_fidelity(&["hemo", "al", "dm", "sc"], &["hemo", "al"]).unwrap();
        assert_eq!((f.precision, f.recall), (0.5, 1.0));
        assert!((f.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(external_fidelity(&["a"], &["b"]).unwrap().f1, 0.0);
        assert_eq!(interpretability_score(4, 24).unwrap(), 20.0 / 24.0);
        assert_eq!(interpretability_score(24, 24).unwrap(), 0.0);
        assert!(interpretability_score(25, 24).is_err());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round2(0.875), 0.88);
        assert_eq!(round2(0.696), 0.70);
        assert_eq!(round2(0.6097), 0.61);
    }
}
