//! Naive Bayes with Gaussian likelihoods for numeric features and smoothed
//! frequency tables for nominal ones.

use serde::{Deserialize, Serialize};

use super::{normalize_importances, Predictor};
use crate::tabular::{FeatureKind, FeatureMatrix};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesParams {
    /// Added to every variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
    /// Laplace pseudo-count for nominal levels.
    pub alpha: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self {
            var_smoothing: 1e-9,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Likelihood {
    Gaussian {
        mean: [f64; 2],
        var: [f64; 2],
    },
    Categorical {
        levels: Vec<f64>,
        /// `log_prob[class][level]`
        log_prob: [Vec<f64>; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    log_prior: [f64; 2],
    features: Vec<Likelihood>,
    importances: Vec<f64>,
}

fn level_index(levels: &[f64], x: f64) -> Option<usize> {
    levels.iter().position(|&l| (l - x).abs() < 1e-9)
}

impl NaiveBayes {
    pub fn fit(params: &NaiveBayesParams, data: &FeatureMatrix) -> Result<Self> {
        let n = data.n_rows() as f64;
        let counts = data.class_counts();
        let log_prior = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
        let max_var = (0..data.n_features())
            .map(|j| crate::stats::variance(&data.column(j)))
            .fold(0.0, f64::max);
        let eps = (params.var_smoothing * max_var).max(1e-12);
        let mut features = Vec::new();
        let mut raw_importance = Vec::new();
        for j in 0..data.n_features() {
            let by_class: [Vec<f64>; 2] = [0, 1].map(|c| {
                data.rows
                    .iter()
                    .zip(&data.labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(r, _)| r[j])
                    .collect()
            });
            let mean = [0, 1].map(|c| crate::stats::mean(&by_class[c]));
            let var = [0, 1].map(|c| crate::stats::variance(&by_class[c]) + eps);
            let pooled = (var[0] * by_class[0].len() as f64 + var[1] * by_class[1].len() as f64) / n;
            raw_importance.push((mean[1] - mean[0]).abs() / pooled.sqrt());
            let lik = match &data.kinds[j] {
                FeatureKind::Numeric => Likelihood::Gaussian { mean, var },
                FeatureKind::Nominal { levels } => {
                    let k = levels.len() as f64;
                    let log_prob = [0, 1].map(|c| {
                        let mut freq = vec![0.0; levels.len()];
                        for &x in &by_class[c] {
                            if let Some(i) = level_index(levels, x) {
                                freq[i] += 1.0;
                            }
                        }
                        let total = by_class[c].len() as f64 + params.alpha * k;
                        freq.iter().map(|f| ((f + params.alpha) / total).ln()).collect()
                    });
                    Likelihood::Categorical {
                        levels: levels.clone(),
                        log_prob,
                    }
                }
            };
            features.push(lik);
        }
        Ok(Self {
            log_prior,
            features,
            importances: normalize_importances(raw_importance),
        })
    }

    /// Unnormalized joint log-likelihood per class.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> [f64; 2] {
        let mut out = self.log_prior;
        for (x, lik) in row.iter().zip(&self.features) {
            for c in 0..2 {
                out[c] += match lik {
                    Likelihood::Gaussian { mean, var } => {
                        -0.5 * ((2.0 * std::f64::consts::PI * var[c]).ln() + (x - mean[c]).powi(2) / var[c])
                    }
                    Likelihood::Categorical { levels, log_prob } => match level_index(levels, *x) {
                        Some(i) => log_prob[c][i],
                        // unseen value carries no evidence either way
                        None => 0.0,
                    },
                };
            }
        }
        out
    }
}

impl Predictor for NaiveBayes {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let j = self.joint_log_likelihood(row);
        let m = j[0].max(j[1]);
        let e = [(j[0] - m).exp(), (j[1] - m).exp()];
        let s = e[0] + e[1];
        [e[0] / s, e[1] / s]
    }

    fn feature_importances(&self) -> Vec<f64> {
        self.importances.clone()
    }

    fn n_features(&self) -> usize {
        self.features.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_posterior_matches_hand_computation() {
        let rows = vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0]];
        let data = FeatureMatrix::numeric(&["x"], rows, vec![0, 0, 1, 1]).unwrap();
        let m = NaiveBayes::fit(
            &NaiveBayesParams {
                var_smoothing: 0.0,
                ..Default::default()
            },
            &data,
        )
        .unwrap();
        // class means 1 and 5, both variances 1, equal priors
        let x = 2.5f64;
        let l0 = (-(x - 1.0).powi(2) / 2.0).exp();
        let l1 = (-(x - 5.0).powi(2) / 2.0).exp();
        let p = m.predict_proba(&[x]);
        assert!((p[1] - l1 / (l0 + l1)).abs() < 1e-9);
    }

    #[test]
    fn nominal_counts_are_laplace_smoothed() {
        let kinds = vec![FeatureKind::Nominal { levels: vec![0.0, 1.0] }];
        let rows = vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0], vec![1.0], vec![0.0]];
        let data = FeatureMatrix::new(
            vec!["b".into()],
            kinds,
            rows,
            vec![0, 0, 0, 1, 1, 1],
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let m = NaiveBayes::fit(&NaiveBayesParams::default(), &data).unwrap();
        // class 0: P(b=1) = (1+1)/(3+2); class 1: (2+1)/(3+2)
        let p = m.predict_proba(&[1.0]);
        assert!((p[1] - 0.6 / (0.6 + 0.4)).abs() < 1e-12);
    }
}
