//! Penalized logistic regression fitted by FISTA on standardized features.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{column_scaling, normalize_importances, proba_pair, Predictor};
use crate::stats::sigmoid;
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    /// Each class weighted by `n / (2 n_c)`.
    Balanced,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub penalty: Penalty,
    pub class_weight: ClassWeight,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            penalty: Penalty::L1,
            class_weight: ClassWeight::Balanced,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    means: Vec<f64>,
    stds: Vec<f64>,
    /// Coefficients on the standardized scale.
    coefficients: Vec<f64>,
    intercept: f64,
    iterations: usize,
    converged: bool,
}

struct Problem<'a> {
    z: &'a [Vec<f64>],
    y: &'a [f64],
    w: &'a [f64],
    lambda: f64,
    penalty: Penalty,
}

impl Problem<'_> {
    /// Smooth part of the objective and its gradient; `theta` ends with the intercept.
    fn smooth(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = theta.len() - 1;
        let n = self.z.len() as f64;
        let mut grad = vec![0.0; d + 1];
        let mut loss = 0.0;
        for ((row, &t), &w) in self.z.iter().zip(self.y).zip(self.w) {
            let eta = theta[d] + row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
            let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            loss += w * (softplus - t * eta);
            let r = w * (sigmoid(eta) - t);
            for j in 0..d {
                grad[j] += r * row[j];
            }
            grad[d] += r;
        }
        loss /= n;
        for g in grad.iter_mut() {
            *g /= n;
        }
        if self.penalty == Penalty::L2 {
            for j in 0..d {
                loss += 0.5 * self.lambda * theta[j] * theta[j];
                grad[j] += self.lambda * theta[j];
            }
        }
        (loss, grad)
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        let (f, _) = self.smooth(theta);
        if self.penalty == Penalty::L1 {
            let d = theta.len() - 1;
            f + self.lambda * theta[..d].iter().map(|b| b.abs()).sum::<f64>()
        } else {
            f
        }
    }

    fn prox(&self, theta: &mut [f64], step: f64) {
        if self.penalty == Penalty::L1 {
            let d = theta.len() - 1;
            let k = step * self.lambda;
            for b in theta[..d].iter_mut() {
                *b = b.signum() * (b.abs() - k).max(0.0);
            }
        }
    }

    /// Largest eigenvalue of the weighted Gram matrix bounds the gradient's Lipschitz constant.
    fn lipschitz(&self) -> f64 {
        let d = self.z[0].len();
        let n = self.z.len() as f64;
        let mut g = DMatrix::<f64>::zeros(d + 1, d + 1);
        for (row, &w) in self.z.iter().zip(self.w) {
            for a in 0..=d {
                let xa = if a == d { 1.0 } else { row[a] };
                for b in a..=d {
                    let xb = if b == d { 1.0 } else { row[b] };
                    g[(a, b)] += w * xa * xb;
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        let top = g.symmetric_eigenvalues().max().max(1e-12);
        let l2 = if self.penalty == Penalty::L2 { self.lambda } else { 0.0 };
        0.25 * top / n * 1.001 + l2
    }
}

impl LogisticRegression {
    pub fn fit(params: &LogisticParams, data: &FeatureMatrix) -> Result<Self> {
        let n = data.n_rows();
        let d = data.n_features();
        let (means, stds) = column_scaling(data);
        let z: Vec<Vec<f64>> = data
            .rows
            .iter()
            .map(|r| (0..d).map(|j| (r[j] - means[j]) / stds[j]).collect())
            .collect();
        let y: Vec<f64> = data.labels.iter().map(|&l| l as f64).collect();
        let w: Vec<f64> = match params.class_weight {
            ClassWeight::None => vec![1.0; n],
            ClassWeight::Balanced => {
                let counts = data.class_counts();
                data.labels.iter().map(|&l| n as f64 / (2.0 * counts[l] as f64)).collect()
            }
        };
        let problem = Problem {
            z: &z,
            y: &y,
            w: &w,
            lambda: 1.0 / (params.c * n as f64),
            penalty: params.penalty,
        };
        let step = 1.0 / problem.lipschitz();

        let mut x = vec![0.0; d + 1];
        let mut v = x.clone();
        let mut t = 1.0f64;
        let mut f_prev = problem.objective(&x);
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..params.max_iter {
            iterations = it + 1;
            let (_, g) = problem.smooth(&v);
            let mut next: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            problem.prox(&mut next, step);
            let f_next = problem.objective(&next);
            let change = next
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if f_next > f_prev && t > 1.0 {
                // adaptive restart: drop momentum
                t = 1.0;
                v = x.clone();
                continue;
            }
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            v = next.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
            x = next;
            t = t_next;
            f_prev = f_next;
            if change < params.tol {
                converged = true;
                break;
            }
        }
        if x.iter().any(|b| !b.is_finite()) {
            return Err(Error::Training("logistic coefficients diverged".into()));
        }
        let intercept = x.pop().unwrap_or(0.0);
        Ok(Self {
            means,
            stds,
            coefficients: x,
            intercept,
            iterations,
            converged,
        })
    }

    pub fn standardized_coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Log-odds of class 1.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coefficients)
                .enumerate()
                .map(|(j, (x, b))| b * (x - self.means[j]) / self.stds[j])
                .sum::<f64>()
    }
}

impl Predictor for LogisticRegression {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        proba_pair(sigmoid(self.decision(row)))
    }

    fn feature_importances(&self) -> Vec<f64> {
        normalize_importances(self.coefficients.iter().map(|b| b.abs()).collect())
    }

    fn n_features(&self) -> usize {
        self.coefficients.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{fit_logistic, LogitOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn overlapping(n: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let p = sigmoid(1.5 * a - 0.7 * b + 0.3);
            labels.push(usize::from(rng.random::<f64>() < p));
            rows.push(vec![10.0 + 3.0 * a, b]);
        }
        FeatureMatrix::numeric(&["a", "b"], rows, labels).unwrap()
    }

    #[test]
    fn unpenalized_fit_matches_newton() {
        let data = overlapping(300, 1);
        let params = LogisticParams {
            penalty: Penalty::None,
            class_weight: ClassWeight::None,
            max_iter: 20000,
            tol: 1e-10,
            ..Default::default()
        };
        let m = LogisticRegression::fit(&params, &data).unwrap();
        let y: Vec<f64> = data.labels.iter().map(|&l| l as f64).collect();
        let newton = fit_logistic(&data.rows, &y, None, LogitOptions::default()).unwrap();
        for r in &data.rows {
            let a = m.predict_proba(r)[1];
            let b = newton.predict(r);
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn strong_l1_zeroes_everything() {
        let data = overlapping(200, 2);
        let params = LogisticParams {
            penalty: Penalty::L1,
            c: 1e-4,
            ..Default::default()
        };
        let m = LogisticRegression::fit(&params, &data).unwrap();
        assert!(m.standardized_coefficients().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn balanced_weights_shift_the_intercept_toward_the_minority() {
        let mut data = overlapping(300, 3);
        let keep: Vec<usize> = (0..data.n_rows()).filter(|&i| data.labels[i] == 0 || i % 4 == 0).collect();
        data = data.subset_rows(&keep);
        let plain = LogisticRegression::fit(
            &LogisticParams {
                class_weight: ClassWeight::None,
                ..Default::default()
            },
            &data,
        )
        .unwrap();
        let balanced = LogisticRegression::fit(
            &LogisticParams {
                class_weight: ClassWeight::Balanced,
                ..Default::default()
            },
            &data,
        )
        .unwrap();
        assert!(balanced.intercept() > plain.intercept());
    }
}
