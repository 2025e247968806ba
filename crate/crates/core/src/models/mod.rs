//! Binary classifiers behind one [`Predictor`] interface.
//!
//! Every family is trained through [`train`] from a [`ModelSpec`]. Labels are
//! class indices `0` and `1`; probabilities are returned as `[p0, p1]`.

mod adaboost;
mod artifact;
mod forest;
mod gbm;
mod grid;
mod logistic;
mod naive_bayes;
mod svm;
mod tree;

use serde::{Deserialize, Serialize};

use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

pub use adaboost::{AdaBoost, AdaBoostParams};
pub use artifact::{FeatureStats, ModelArtifact, ARTIFACT_VERSION};
pub use forest::{MaxFeatures, RandomForest, RandomForestParams};
pub use gbm::{GbmParams, GradientBoosting};
pub use grid::{grid_search, GridCell, GridSearchResult};
pub use logistic::{ClassWeight, LogisticParams, LogisticRegression, Penalty};
pub use naive_bayes::{NaiveBayes, NaiveBayesParams};
pub use svm::{LinearSvm, SvmParams};
pub use tree::{export_tree, DecisionTree, TreeNode, TreeParams};

/// A trained binary classifier.
pub trait Predictor: Send + Sync {
    /// `[P(class 0), P(class 1)]`, summing to one.
    fn predict_proba(&self, row: &[f64]) -> [f64; 2];

    /// Non-negative, sums to one, one entry per feature.
    fn feature_importances(&self) -> Vec<f64>;

    fn n_features(&self) -> usize;

    /// Most probable class; an exact tie goes to class 0.
    fn predict(&self, row: &[f64]) -> usize {
        let p = self.predict_proba(row);
        usize::from(p[1] > p[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lr,
    Nb,
    Lsvm,
    Dt,
    Rf,
    Ada,
    Gbm,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Lr,
        Family::Nb,
        Family::Lsvm,
        Family::Dt,
        Family::Rf,
        Family::Ada,
        Family::Gbm,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Family::Lr => "LR",
            Family::Nb => "NB",
            Family::Lsvm => "LSVM",
            Family::Dt => "DT",
            Family::Rf => "RF",
            Family::Ada => "ADA",
            Family::Gbm => "GBM",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Some(match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Family::Lr,
            "nb" | "naive_bayes" => Family::Nb,
            "lsvm" | "svm" => Family::Lsvm,
            "dt" | "tree" => Family::Dt,
            "rf" | "forest" => Family::Rf,
            "ada" | "adaboost" => Family::Ada,
            "gbm" | "boosting" => Family::Gbm,
            _ => return None,
        })
    }

    pub fn is_tree(&self) -> bool {
        matches!(self, Family::Dt | Family::Rf)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Family-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Hyperparameters {
    Lr(LogisticParams),
    Nb(NaiveBayesParams),
    Lsvm(SvmParams),
    Dt(TreeParams),
    Rf(RandomForestParams),
    Ada(AdaBoostParams),
    Gbm(GbmParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub params: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(params: Hyperparameters, seed: u64) -> Self {
        Self { params, seed }
    }

    /// Default hyperparameters for a family.
    pub fn default_for(family: Family, seed: u64) -> Self {
        let params = match family {
            Family::Lr => Hyperparameters::Lr(LogisticParams::default()),
            Family::Nb => Hyperparameters::Nb(NaiveBayesParams::default()),
            Family::Lsvm => Hyperparameters::Lsvm(SvmParams::default()),
            Family::Dt => Hyperparameters::Dt(TreeParams::default()),
            Family::Rf => Hyperparameters::Rf(RandomForestParams::default()),
            Family::Ada => Hyperparameters::Ada(AdaBoostParams::default()),
            Family::Gbm => Hyperparameters::Gbm(GbmParams::default()),
        };
        Self { params, seed }
    }

    pub fn family(&self) -> Family {
        match self.params {
            Hyperparameters::Lr(_) => Family::Lr,
            Hyperparameters::Nb(_) => Family::Nb,
            Hyperparameters::Lsvm(_) => Family::Lsvm,
            Hyperparameters::Dt(_) => Family::Dt,
            Hyperparameters::Rf(_) => Family::Rf,
            Hyperparameters::Ada(_) => Family::Ada,
            Hyperparameters::Gbm(_) => Family::Gbm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::invalid(format!("{name} must be at least 1")))
            } else {
                Ok(())
            }
        };
        match &self.params {
            Hyperparameters::Lr(p) => {
                if !(p.c > 0.0) {
                    return Err(Error::invalid("C must be positive"));
                }
                positive("max_iter", p.max_iter)
            }
            Hyperparameters::Nb(_) => Ok(()),
            Hyperparameters::Lsvm(p) => {
                if !(p.lambda > 0.0) {
                    return Err(Error::invalid("lambda must be positive"));
                }
                positive("epochs", p.epochs)
            }
            Hyperparameters::Dt(p) => p.validate(),
            Hyperparameters::Rf(p) => {
                positive("n_estimators", p.n_estimators)?;
                p.tree.validate()
            }
            Hyperparameters::Ada(p) => {
                positive("n_estimators", p.n_estimators)?;
                check_rate(p.learning_rate)
            }
            Hyperparameters::Gbm(p) => {
                positive("n_rounds", p.n_rounds)?;
                positive("max_depth", p.max_depth)?;
                check_rate(p.learning_rate)
            }
        }
    }
}

fn check_rate(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("learning_rate must lie in (0, 1]"))
    }
}

/// Any trained model; serializable for artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Model {
    Lr(LogisticRegression),
    Nb(NaiveBayes),
    Lsvm(LinearSvm),
    Dt(DecisionTree),
    Rf(RandomForest),
    Ada(AdaBoost),
    Gbm(GradientBoosting),
}

impl Model {
    pub fn family(&self) -> Family {
        match self {
            Model::Lr(_) => Family::Lr,
            Model::Nb(_) => Family::Nb,
            Model::Lsvm(_) => Family::Lsvm,
            Model::Dt(_) => Family::Dt,
            Model::Rf(_) => Family::Rf,
            Model::Ada(_) => Family::Ada,
            Model::Gbm(_) => Family::Gbm,
        }
    }

    fn inner(&self) -> &dyn Predictor {
        match self {
            Model::Lr(m) => m,
            Model::Nb(m) => m,
            Model::Lsvm(m) => m,
            Model::Dt(m) => m,
            Model::Rf(m) => m,
            Model::Ada(m) => m,
            Model::Gbm(m) => m,
        }
    }
}

impl Predictor for Model {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        self.inner().predict_proba(row)
    }

    fn feature_importances(&self) -> Vec<f64> {
        self.inner().feature_importances()
    }

    fn n_features(&self) -> usize {
        self.inner().n_features()
    }
}

fn check_training_data(data: &FeatureMatrix) -> Result<()> {
    if data.n_rows() < 2 {
        return Err(Error::Training("at least two rows are required".into()));
    }
    if data.n_features() == 0 {
        return Err(Error::Training("no features".into()));
    }
    if data.labels.iter().any(|&l| l > 1) {
        return Err(Error::Training("labels must be 0 or 1".into()));
    }
    let ones = data.labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == data.n_rows() {
        return Err(Error::Training("degenerate labels: only one class present".into()));
    }
    Ok(())
}

pub fn train(spec: &ModelSpec, data: &FeatureMatrix) -> Result<Model> {
    spec.validate()?;
    check_training_data(data)?;
    let seed = spec.seed;
    Ok(match &spec.params {
        Hyperparameters::Lr(p) => Model::Lr(LogisticRegression::fit(p, data)?),
        Hyperparameters::Nb(p) => Model::Nb(NaiveBayes::fit(p, data)?),
        Hyperparameters::Lsvm(p) => Model::Lsvm(LinearSvm::fit(p, data, seed)?),
        Hyperparameters::Dt(p) => Model::Dt(DecisionTree::fit(p, data)?),
        Hyperparameters::Rf(p) => Model::Rf(RandomForest::fit(p, data, seed)?),
        Hyperparameters::Ada(p) => Model::Ada(AdaBoost::fit(p, data)?),
        Hyperparameters::Gbm(p) => Model::Gbm(GradientBoosting::fit(p, data)?),
    })
}

/// Normalizes to sum one; an all-zero vector becomes uniform.
pub(crate) fn normalize_importances(mut v: Vec<f64>) -> Vec<f64> {
    for x in v.iter_mut() {
        if !x.is_finite() || *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter().map(|x| x / s).collect()
    } else {
        let n = v.len().max(1) as f64;
        vec![1.0 / n; v.len()]
    }
}

/// Column means and population stds; a zero std is replaced by one.
pub(crate) fn column_scaling(data: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let d = data.n_features();
    let mut means = vec![0.0; d];
    let mut stds = vec![1.0; d];
    for j in 0..d {
        let col = data.column(j);
        means[j] = crate::stats::mean(&col);
        let s = crate::stats::std_dev(&col);
        stds[j] = if s > 0.0 { s } else { 1.0 };
    }
    (means, stds)
}

pub(crate) fn proba_pair(p1: f64) -> [f64; 2] {
    let p1 = p1.clamp(0.0, 1.0);
    [1.0 - p1, p1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ModelSpec::default_for(Family::Rf, 9);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"family\":\"rf\""));
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = ModelSpec::default_for(Family::Gbm, 0);
        if let Hyperparameters::Gbm(p) = &mut spec.params {
            p.learning_rate = 1.5;
        }
        assert!(spec.validate().is_err());
        let mut spec = ModelSpec::default_for(Family::Rf, 0);
        if let Hyperparameters::Rf(p) = &mut spec.params {
            p.n_estimators = 0;
        }
        assert!(spec.validate().is_err());
    }

    #[test]
    fn degenerate_labels_fail() {
        let m = FeatureMatrix::numeric(&["x"], vec![vec![1.0], vec![2.0]], vec![1, 1]).unwrap();
        for f in [Family::Lr, Family::Nb, Family::Lsvm, Family::Dt, Family::Rf, Family::Ada, Family::Gbm] {
            assert!(matches!(train(&ModelSpec::default_for(f, 0), &m), Err(Error::Training(_))), "{f}");
        }
    }

    #[test]
    fn importance_normalization() {
        assert_eq!(normalize_importances(vec![0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(normalize_importances(vec![1.0, 3.0]), vec![0.25, 0.75]);
    }
}
