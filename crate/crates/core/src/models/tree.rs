//! CART classification trees with Gini impurity.
//!
//! Splits are searched exhaustively over midpoints between consecutive
//! distinct values. Rows with `value <= threshold` go left. Equal gains keep
//! the lowest feature index, then the lowest threshold.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{normalize_importances, Model, Predictor};
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// A split must reduce weighted impurity, relative to the root, by at
    /// least this much.
    pub min_impurity_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 16,
            min_samples_split: 2,
            min_samples_leaf: 1,
            min_impurity_decrease: 1e-7,
        }
    }
}

impl TreeParams {
    pub fn with_depth(max_depth: usize) -> Self {
        Self {
            max_depth,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_samples_split < 2 || self.min_samples_leaf == 0 {
            return Err(Error::invalid(
                "tree needs max_depth >= 1, min_samples_split >= 2, min_samples_leaf >= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Node {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub impurity: f64,
    pub n_samples: usize,
    pub class_counts: [usize; 2],
    /// Weighted class proportions.
    pub value: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<Node>,
    n_features: usize,
    importances: Vec<f64>,
}

pub(crate) fn gini(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        return 0.0;
    }
    let (p0, p1) = (w0 / w, w1 / w);
    (1.0 - p0 * p0 - p1 * p1).max(0.0)
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    params: &'a TreeParams,
    max_features: Option<usize>,
    rng: Option<&'a mut ChaCha8Rng>,
    root_weight: f64,
    nodes: Vec<Node>,
    gains: Vec<f64>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn candidates(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        match (self.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, samples: &mut [(usize, f64)], w0: f64, w1: f64) -> Option<Split> {
        let parent = gini(w0, w1);
        let w = w0 + w1;
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<Split> = None;
        for f in self.candidates() {
            let x = self.x;
            samples.sort_by(|a, b| x[a.0][f].total_cmp(&x[b.0][f]).then(a.0.cmp(&b.0)));
            let (mut l0, mut l1) = (0.0, 0.0);
            for i in 0..samples.len() - 1 {
                let (r, wt) = samples[i];
                if self.y[r] == 0 {
                    l0 += wt;
                } else {
                    l1 += wt;
                }
                let (lo, hi) = (x[r][f], x[samples[i + 1].0][f]);
                if lo >= hi || i + 1 < min_leaf || samples.len() - i - 1 < min_leaf {
                    continue;
                }
                let (r0, r1) = (w0 - l0, w1 - l1);
                let wl = l0 + l1;
                let wr = r0 + r1;
                let gain = parent - (wl / w) * gini(l0, l1) - (wr / w) * gini(r0, r1);
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                if best.as_ref().is_none_or(|b| gain > b.gain + 1e-12) {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, mut samples: Vec<(usize, f64)>, depth: usize) -> usize {
        let mut counts = [0usize; 2];
        let (mut w0, mut w1) = (0.0, 0.0);
        for &(r, wt) in &samples {
            counts[self.y[r]] += 1;
            if self.y[r] == 0 {
                w0 += wt;
            } else {
                w1 += wt;
            }
        }
        let w = w0 + w1;
        let impurity = gini(w0, w1);
        let id = self.nodes.len();
        self.nodes.push(Node {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            impurity,
            n_samples: samples.len(),
            class_counts: counts,
            value: if w > 0.0 { [w0 / w, w1 / w] } else { [0.5, 0.5] },
        });
        if depth >= self.params.max_depth || samples.len() < self.params.min_samples_split || impurity <= 1e-15 {
            return id;
        }
        let Some(split) = self.best_split(&mut samples, w0, w1) else {
            return id;
        };
        let decrease = w / self.root_weight * split.gain;
        if decrease < self.params.min_impurity_decrease {
            return id;
        }
        self.gains[split.feature] += decrease;
        let (left, right): (Vec<_>, Vec<_>) = samples
            .into_iter()
            .partition(|&(r, _)| self.x[r][split.feature] <= split.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        let node = &mut self.nodes[id];
        node.feature = Some(split.feature);
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        id
    }
}

impl DecisionTree {
    pub fn fit(params: &TreeParams, data: &FeatureMatrix) -> Result<Self> {
        params.validate()?;
        let samples: Vec<(usize, f64)> = (0..data.n_rows()).map(|r| (r, 1.0)).collect();
        Ok(Self::grow(&data.rows, &data.labels, samples, params, None, None))
    }

    /// Grows a tree on `(row, weight)` samples. Rows may repeat.
    pub(crate) fn grow(
        x: &[Vec<f64>],
        y: &[usize],
        samples: Vec<(usize, f64)>,
        params: &TreeParams,
        max_features: Option<usize>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let n_features = x.first().map_or(0, |r| r.len());
        let mut g = Grower {
            x,
            y,
            params,
            max_features,
            rng,
            root_weight: samples.iter().map(|s| s.1).sum(),
            nodes: Vec::new(),
            gains: vec![0.0; n_features],
        };
        g.grow(samples, 0);
        DecisionTree {
            nodes: g.nodes,
            n_features,
            importances: normalize_importances(g.gains),
        }
    }

    fn leaf(&self, row: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            match n.feature {
                None => return n,
                Some(f) => i = if row[f] <= n.threshold { n.left } else { n.right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, i: usize) -> usize {
            let n = &t.nodes[i];
            match n.feature {
                None => 0,
                Some(_) => 1 + walk(t, n.left).max(walk(t, n.right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature.is_none()).count()
    }

    /// Raw (unnormalized) root split, if any: `(feature, threshold)`.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        self.nodes[0].feature.map(|f| (f, self.nodes[0].threshold))
    }

    pub fn to_node(&self, names: &[String]) -> TreeNode {
        let root = self.nodes[0].n_samples.max(1) as f64;
        fn build(t: &DecisionTree, i: usize, names: &[String], root: f64) -> TreeNode {
            let n = &t.nodes[i];
            let (left, right) = match n.feature {
                Some(_) => (
                    Some(Box::new(build(t, n.left, names, root))),
                    Some(Box::new(build(t, n.right, names, root))),
                ),
                None => (None, None),
            };
            TreeNode {
                feature: n.feature.map(|f| names.get(f).cloned().unwrap_or_else(|| format!("x{f}"))),
                feature_index: n.feature,
                threshold: n.feature.map(|_| n.threshold),
                impurity: n.impurity,
                sample_fraction: n.n_samples as f64 / root,
                n_samples: n.n_samples,
                class_counts: n.class_counts,
                probability: n.value,
                left,
                right,
            }
        }
        build(self, 0, names, root)
    }
}

impl Predictor for DecisionTree {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        self.leaf(row).value
    }

    fn feature_importances(&self) -> Vec<f64> {
        self.importances.clone()
    }

    fn n_features(&self) -> usize {
        self.n_features
    }
}

/// Serializable view of a fitted tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// `None` on leaves.
    pub feature: Option<String>,
    pub feature_index: Option<usize>,
    pub threshold: Option<f64>,
    pub impurity: f64,
    pub sample_fraction: f64,
    pub n_samples: usize,
    pub class_counts: [usize; 2],
    pub probability: [f64; 2],
    pub left: Option<Box<TreeNode>>,
    pub right: Option<Box<TreeNode>>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }

    /// Pre-order iterator over every node.
    pub fn walk(&self) -> Vec<&TreeNode> {
        let mut out = vec![self];
        if let Some(l) = &self.left {
            out.extend(l.walk());
        }
        if let Some(r) = &self.right {
            out.extend(r.walk());
        }
        out
    }
}

/// Exports a decision tree, or member `member` of a random forest.
pub fn export_tree(model: &Model, member: Option<usize>, names: &[String]) -> Result<TreeNode> {
    match model {
        Model::Dt(t) => Ok(t.to_node(names)),
        Model::Rf(f) => {
            let i = member.unwrap_or(0);
            f.trees()
                .get(i)
                .map(|t| t.to_node(names))
                .ok_or_else(|| Error::invalid(format!("forest has no tree {i}")))
        }
        other => Err(Error::NotATree(other.family().label().to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> FeatureMatrix {
        let names: Vec<String> = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        FeatureMatrix::numeric(&refs, rows, labels).unwrap()
    }

    #[test]
    fn stump_on_two_points() {
        let t = DecisionTree::fit(&TreeParams::default(), &fm(vec![vec![0.0], vec![1.0]], vec![0, 1])).unwrap();
        let node = t.to_node(&["x".to_string()]);
        assert_eq!(node.threshold, Some(0.5));
        assert_eq!(node.left.as_ref().unwrap().impurity, 0.0);
        assert_eq!(node.right.as_ref().unwrap().impurity, 0.0);
        assert_eq!(t.predict(&[0.2]), 0);
        assert_eq!(t.predict(&[0.7]), 1);
    }

    #[test]
    fn root_gini_matches_formula() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..400 {
            rows.push(vec![i as f64]);
            labels.push(usize::from(i >= 250));
        }
        let t = DecisionTree::fit(&TreeParams::default(), &fm(rows, labels)).unwrap();
        let root = t.to_node(&["x".into()]);
        assert!((root.impurity - 0.46875).abs() < 1e-12);
        assert_eq!(root.class_counts, [250, 150]);
        assert_eq!(root.sample_fraction, 1.0);
    }

    #[test]
    fn impurity_and_fractions_are_consistent() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i * 7 % 13) as f64, (i % 5) as f64]).collect();
        let labels: Vec<usize> = (0..60).map(|i| usize::from((i * 7 % 13) + (i % 5) > 8)).collect();
        let t = DecisionTree::fit(&TreeParams::default(), &fm(rows, labels)).unwrap();
        for n in t.to_node(&["a".into(), "b".into()]).walk() {
            assert!((0.0..=0.5).contains(&n.impurity));
            assert!(n.class_counts[0] + n.class_counts[1] > 0);
            if let (Some(l), Some(r)) = (&n.left, &n.right) {
                assert_eq!(l.n_samples + r.n_samples, n.n_samples);
            }
        }
        let s: f64 = t.feature_importances().iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn export_rejects_other_families() {
        let data = fm(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 1]);
        let m = super::super::train(&super::super::ModelSpec::default_for(super::super::Family::Nb, 0), &data).unwrap();
        assert!(matches!(export_tree(&m, None, &[]), Err(Error::NotATree(_))));
    }
}
