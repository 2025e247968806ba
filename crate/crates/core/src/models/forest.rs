use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use super::{normalize_importances, Predictor};
use crate::tabular::FeatureMatrix;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(&self, d: usize) -> usize {
        match *self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomForestParams {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    #[serde(flatten)]
    pub tree: TreeParams,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

/// Independent stream per tree so results do not depend on thread count.
fn tree_seed(seed: u64, t: usize) -> u64 {
    let mut z = seed ^ (t as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomForest {
    pub fn fit(params: &RandomForestParams, data: &FeatureMatrix, seed: u64) -> Result<Self> {
        let n = data.n_rows();
        let d = data.n_features();
        let m = params.max_features.resolve(d);
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, t));
                let samples: Vec<(usize, f64)> = if params.bootstrap {
                    (0..n).map(|_| (rng.random_range(0..n), 1.0)).collect()
                } else {
                    (0..n).map(|r| (r, 1.0)).collect()
                };
                DecisionTree::grow(&data.rows, &data.labels, samples, &params.tree, Some(m), Some(&mut rng))
            })
            .collect();
        Ok(Self { trees, n_features: d })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

impl Predictor for RandomForest {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let mut p1 = 0.0;
        for t in &self.trees {
            p1 += t.predict_proba(row)[1];
        }
        p1 /= self.trees.len() as f64;
        [1.0 - p1, p1]
    }

    fn feature_importances(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.feature_importances()) {
                *a += v;
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

    fn noisy(n: usize) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            let c: f64 = rng.random();
            let flip = rng.random::<f64>() < 0.1;
            labels.push(usize::from((a + 0.5 * b > 0.75) ^ flip));
            rows.push(vec![a, b, c]);
        }
        FeatureMatrix::numeric(&["a", "b", "c"], rows, labels).unwrap()
    }

    #[test]
    fn single_unbagged_tree_matches_decision_tree() {
        let data = noisy(200);
        let params = RandomForestParams {
            n_estimators: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
            tree: TreeParams::default(),
        };
        let rf = RandomForest::fit(&params, &data, 11).unwrap();
        let dt = DecisionTree::fit(&TreeParams::default(), &data).unwrap();
        for r in &data.rows {
            assert_eq!(rf.predict_proba(r), dt.predict_proba(r));
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let data = noisy(150);
        let p = RandomForestParams {
            n_estimators: 20,
            ..Default::default()
        };
        assert_eq!(RandomForest::fit(&p, &data, 5).unwrap(), RandomForest::fit(&p, &data, 5).unwrap());
        assert_ne!(RandomForest::fit(&p, &data, 5).unwrap(), RandomForest::fit(&p, &data, 6).unwrap());
    }

    #[test]
    fn probabilities_and_importances_are_normalized() {
        let data = noisy(150);
        let rf = RandomForest::fit(&RandomForestParams::default(), &data, 1).unwrap();
        for r in &data.rows {
            let p = rf.predict_proba(r);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9 && p[1] >= 0.0 && p[1] <= 1.0);
        }
        let imp = rf.feature_importances();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // the unused feature ranks last
        assert!(imp[2] < imp[0] && imp[2] < imp[1]);
    }
}
