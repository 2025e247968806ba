//! Gradient boosting on the logistic loss with second-order regression trees.

use serde::{Deserialize, Serialize};

use super::{normalize_importances, Predictor};
use crate::stats::sigmoid;
use crate::tabular::FeatureMatrix;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegNode {
    feature: Option<usize>,
    threshold: f64,
    left: usize,
    right: usize,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegTree {
    nodes: Vec<RegNode>,
}

impl RegTree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            match n.feature {
                None => return n.value,
                Some(f) => i = if row[f] <= n.threshold { n.left } else { n.right },
            }
        }
    }
}

struct RegGrower<'a> {
    x: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    params: &'a GbmParams,
    nodes: Vec<RegNode>,
    gains: &'a mut [f64],
}

impl RegGrower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn grow(&mut self, mut idx: Vec<usize>, depth: usize) -> usize {
        let gs: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let hs: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(RegNode {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: -gs / (hs + self.params.lambda),
        });
        if depth >= self.params.max_depth || idx.len() < 2 * self.params.min_samples_leaf {
            return id;
        }
        let parent = self.score(gs, hs);
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<(usize, f64, f64)> = None;
        let d = self.x[0].len();
        for f in 0..d {
            let x = self.x;
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..idx.len() - 1 {
                gl += self.g[idx[k]];
                hl += self.h[idx[k]];
                let (lo, hi) = (x[idx[k]][f], x[idx[k + 1]][f]);
                if lo >= hi || k + 1 < min_leaf || idx.len() - k - 1 < min_leaf {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(gs - gl, hs - hl) - parent;
                if best.is_none_or(|b| gain > b.2 + 1e-12) {
                    let mut t = lo + (hi - lo) / 2.0;
                    if t >= hi {
                        t = lo;
                    }
                    best = Some((f, t, gain));
                }
            }
        }
        let Some((f, t, gain)) = best else { return id };
        if gain <= 1e-12 {
            return id;
        }
        self.gains[f] += gain;
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][f] <= t);
        let li = self.grow(l, depth + 1);
        let ri = self.grow(r, depth + 1);
        let node = &mut self.nodes[id];
        node.feature = Some(f);
        node.threshold = t;
        node.left = li;
        node.right = ri;
        id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    base_score: f64,
    trees: Vec<RegTree>,
    /// Shrinkage actually applied to each tree.
    steps: Vec<f64>,
    loss_history: Vec<f64>,
    importances: Vec<f64>,
    n_features: usize,
}

fn log_loss(y: &[f64], f: &[f64]) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(f)
        .map(|(&t, &z)| {
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - t * z
        })
        .sum::<f64>()
        / n
}

impl GradientBoosting {
    pub fn fit(params: &GbmParams, data: &FeatureMatrix) -> Result<Self> {
        let n = data.n_rows();
        let y: Vec<f64> = data.labels.iter().map(|&l| l as f64).collect();
        let prior = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
        let base_score = (prior / (1.0 - prior)).ln();
        let mut f = vec![base_score; n];
        let mut loss = log_loss(&y, &f);
        let mut loss_history = vec![loss];
        let mut gains = vec![0.0; data.n_features()];
        let mut trees = Vec::new();
        let mut steps = Vec::new();
        for _ in 0..params.n_rounds {
            let p: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
            let g: Vec<f64> = p.iter().zip(&y).map(|(p, t)| p - t).collect();
            let h: Vec<f64> = p.iter().map(|p| (p * (1.0 - p)).max(1e-16)).collect();
            let mut round_gains = vec![0.0; data.n_features()];
            let mut grower = RegGrower {
                x: &data.rows,
                g: &g,
                h: &h,
                params,
                nodes: Vec::new(),
                gains: &mut round_gains,
            };
            grower.grow((0..n).collect(), 0);
            let tree = RegTree { nodes: grower.nodes };
            let delta: Vec<f64> = data.rows.iter().map(|r| tree.predict(r)).collect();
            // shrink further if a full step would raise the training loss
            let mut step = params.learning_rate;
            let mut accepted = None;
            for _ in 0..20 {
                let cand: Vec<f64> = f.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
                let cand_loss = log_loss(&y, &cand);
                if cand_loss <= loss {
                    accepted = Some((cand, cand_loss));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, cand_loss)) = accepted else {
                break;
            };
            f = cand;
            loss = cand_loss;
            loss_history.push(loss);
            for (a, b) in gains.iter_mut().zip(&round_gains) {
                *a += b;
            }
            trees.push(tree);
            steps.push(step);
        }
        Ok(Self {
            base_score,
            trees,
            steps,
            loss_history,
            importances: normalize_importances(gains),
            n_features: data.n_features(),
        })
    }

    /// Training log-loss before the first round and after each round.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.base_score
            + self
                .trees
                .iter()
                .zip(&self.steps)
                .map(|(t, s)| s * t.predict(row))
                .sum::<f64>()
    }
}

impl Predictor for GradientBoosting {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let p1 = sigmoid(self.raw_score(row));
        [1.0 - p1, p1]
    }

    fn feature_importances(&self) -> Vec<f64> {
        self.importances.clone()
    }

    fn n_features(&self) -> usize {
        self.n_features
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_never_increases() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 17) as f64, (i % 7) as f64]).collect();
        let labels: Vec<usize> = (0..100).map(|i| usize::from((i % 17) * 2 + (i % 7) > 18 || i % 11 == 0)).collect();
        let data = FeatureMatrix::numeric(&["a", "b"], rows, labels).unwrap();
        let m = GradientBoosting::fit(&GbmParams::default(), &data).unwrap();
        let h = m.loss_history();
        assert!(h.len() > 10);
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
        assert!(h.last().unwrap() < &h[0]);
    }
}
