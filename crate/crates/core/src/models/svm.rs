//! Linear SVM trained with Pegasos, probabilities from Platt scaling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{column_scaling, normalize_importances, proba_pair, Predictor};
use crate::stats::sigmoid;
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    /// Regularization strength of the hinge objective.
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    means: Vec<f64>,
    stds: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    platt_a: f64,
    platt_b: f64,
}

/// Fits `P(y=1|f) = sigmoid(a f + b)` by Newton's method on smoothed targets.
fn platt(scores: &[f64], labels: &[usize]) -> (f64, f64) {
    let n1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n0 = labels.len() as f64 - n1;
    let hi = (n1 + 1.0) / (n1 + 2.0);
    let lo = 1.0 / (n0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let (mut a, mut b) = (1.0, ((n1 + 1.0) / (n0 + 1.0)).ln());
    let nll = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = a * f + b;
                let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                softplus - ti * z
            })
            .sum()
    };
    let mut current = nll(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (&f, &ti) in scores.iter().zip(&t) {
            let p = sigmoid(a * f + b);
            let r = p - ti;
            let w = p * (1.0 - p);
            ga += r * f;
            gb += r;
            haa += w * f * f;
            hab += w * f;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let (na, nb) = (a - step * da, b - step * db);
            let v = nll(na, nb);
            if v < current + 1e-4 * step * (ga * da + gb * db).min(0.0) || v < current {
                a = na;
                b = nb;
                improved = current - v > 1e-12;
                current = v;
                break;
            }
            step *= 0.5;
        }
        if !improved || ga.abs().max(gb.abs()) < 1e-9 {
            break;
        }
    }
    (a, b)
}

impl LinearSvm {
    pub fn fit(params: &SvmParams, data: &FeatureMatrix, seed: u64) -> Result<Self> {
        let n = data.n_rows();
        let d = data.n_features();
        let (means, stds) = column_scaling(data);
        let z: Vec<Vec<f64>> = data
            .rows
            .iter()
            .map(|r| (0..d).map(|j| (r[j] - means[j]) / stds[j]).collect())
            .collect();
        let y: Vec<f64> = data.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![0.0; d];
        let mut bias = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0usize;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (params.lambda * t as f64);
                let margin = y[i] * (bias + z[i].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>());
                let shrink = 1.0 - eta * params.lambda;
                for v in w.iter_mut() {
                    *v *= shrink;
                }
                if margin < 1.0 {
                    for (v, x) in w.iter_mut().zip(&z[i]) {
                        *v += eta * y[i] * x;
                    }
                }
                // bias as a constant unit feature, regularized with the rest
                bias = bias * shrink + if margin < 1.0 { eta * y[i] } else { 0.0 };
                let norm = (w.iter().map(|v| v * v).sum::<f64>() + bias * bias).sqrt();
                let cap = 1.0 / params.lambda.sqrt();
                if norm > cap {
                    for v in w.iter_mut() {
                        *v *= cap / norm;
                    }
                    bias *= cap / norm;
                }
            }
        }
        if w.iter().any(|v| !v.is_finite()) || !bias.is_finite() {
            return Err(Error::Training("svm weights are not finite".into()));
        }
        let mut model = Self {
            means,
            stds,
            weights: w,
            bias,
            platt_a: 1.0,
            platt_b: 0.0,
        };
        let scores: Vec<f64> = data.rows.iter().map(|r| model.decision(r)).collect();
        let (a, b) = platt(&scores, &data.labels);
        model.platt_a = a;
        model.platt_b = b;
        Ok(model)
    }

    /// Signed margin; positive favours class 1.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.bias
            + row
                .iter()
                .enumerate()
                .map(|(j, x)| self.weights[j] * (x - self.means[j]) / self.stds[j])
                .sum::<f64>()
    }

    pub fn standardized_weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Predictor for LinearSvm {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        proba_pair(sigmoid(self.platt_a * self.decision(row) + self.platt_b))
    }

    fn feature_importances(&self) -> Vec<f64> {
        normalize_importances(self.weights.iter().map(|w| w.abs()).collect())
    }

    fn n_features(&self) -> usize {
        self.weights.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_a_linear_boundary() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 20) as f64, (i / 20) as f64 * 3.0]).collect();
        let labels: Vec<usize> = rows.iter().map(|r| usize::from(r[0] - r[1] / 3.0 > 4.5)).collect();
        let data = FeatureMatrix::numeric(&["a", "b"], rows, labels).unwrap();
        let m = LinearSvm::fit(&SvmParams::default(), &data, 0).unwrap();
        let acc = data.rows.iter().zip(&data.labels).filter(|(r, &l)| m.predict(r) == l).count();
        assert!(acc >= 190, "{acc}");
        // calibration keeps probabilities monotone in the margin
        assert!(m.platt_a > 0.0);
    }

    #[test]
    fn platt_on_symmetric_scores_is_centred() {
        let scores = [-2.0, -1.0, 1.0, 2.0];
        let (a, b) = platt(&scores, &[0, 0, 1, 1]);
        assert!(a > 0.0);
        assert!(b.abs() < 1e-6);
    }
}
