//! SAMME boosting with depth-1 stumps.

use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use super::{normalize_importances, Predictor};
use crate::stats::sigmoid;
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            learning_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    stumps: Vec<DecisionTree>,
    alphas: Vec<f64>,
    /// Weighted training error of each accepted stump on its round's weights.
    errors: Vec<f64>,
    n_features: usize,
}

impl AdaBoost {
    pub fn fit(params: &AdaBoostParams, data: &FeatureMatrix) -> Result<Self> {
        let n = data.n_rows();
        let stump_params = TreeParams {
            max_depth: 1,
            min_impurity_decrease: 0.0,
            ..TreeParams::default()
        };
        let mut w = vec![1.0 / n as f64; n];
        let mut stumps = Vec::new();
        let mut alphas = Vec::new();
        let mut errors = Vec::new();
        for _ in 0..params.n_estimators {
            let samples: Vec<(usize, f64)> = (0..n).map(|r| (r, w[r])).collect();
            let stump = DecisionTree::grow(&data.rows, &data.labels, samples, &stump_params, None, None);
            let wrong: Vec<bool> = (0..n).map(|r| stump.predict(&data.rows[r]) != data.labels[r]).collect();
            let total: f64 = w.iter().sum();
            let err: f64 = (0..n).filter(|&r| wrong[r]).map(|r| w[r]).sum::<f64>() / total;
            if err >= 0.5 {
                // no weak learner better than chance on these weights
                break;
            }
            if err <= 0.0 {
                stumps.push(stump);
                alphas.push(params.learning_rate * 10.0);
                errors.push(0.0);
                break;
            }
            let alpha = params.learning_rate * ((1.0 - err) / err).ln();
            for r in 0..n {
                if wrong[r] {
                    w[r] *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            for v in w.iter_mut() {
                *v /= s;
            }
            stumps.push(stump);
            alphas.push(alpha);
            errors.push(err);
        }
        if stumps.is_empty() {
            return Err(Error::Training("no stump beat chance on the first round".into()));
        }
        Ok(Self {
            stumps,
            alphas,
            errors,
            n_features: data.n_features(),
        })
    }

    pub fn stump_errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn n_rounds(&self) -> usize {
        self.stumps.len()
    }

    /// Normalized vote in `[-1, 1]`; positive favours class 1.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let total: f64 = self.alphas.iter().sum();
        let vote: f64 = self
            .stumps
            .iter()
            .zip(&self.alphas)
            .map(|(s, a)| if s.predict(row) == 1 { *a } else { -*a })
            .sum();
        vote / total
    }
}

impl Predictor for AdaBoost {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let p1 = sigmoid(2.0 * self.decision(row));
        [1.0 - p1, p1]
    }

    fn feature_importances(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for (s, a) in self.stumps.iter().zip(&self.alphas) {
            for (v, imp) in acc.iter_mut().zip(s.feature_importances()) {
                *v += a * imp;
            }
        }
        normalize_importances(acc)
    }

    fn n_features(&self) -> usize {
        self.n_features
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepted_rounds_beat_chance() {
        let rows: Vec<Vec<f64>> = (0..80).map(|i| vec![(i % 10) as f64, (i / 10) as f64]).collect();
        let labels: Vec<usize> = rows.iter().map(|r| usize::from(r[0] + r[1] > 8.0)).collect();
        let data = FeatureMatrix::numeric(&["a", "b"], rows, labels).unwrap();
        let m = AdaBoost::fit(&AdaBoostParams::default(), &data).unwrap();
        assert!(m.n_rounds() > 1);
        assert!(m.stump_errors().iter().all(|&e| e < 0.5));
        let acc = data.rows.iter().zip(&data.labels).filter(|(r, &l)| m.predict(r) == l).count();
        assert!(acc as f64 / 80.0 > 0.9);
    }
}
