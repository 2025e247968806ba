//! Class balancing, stratified folds and cross-validated evaluation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{self, ModelSpec, Predictor};
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

pub const DEFAULT_K_NEIGHBORS: usize = 5;
pub const DEFAULT_FOLDS: usize = 10;

/// Test-fold index of every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles each class, concatenates the classes and deals positions round-robin.
///
/// `k == labels.len()` is accepted as leave-one-out even when a class has
/// fewer than `k` members.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if k > n {
        return Err(Error::InsufficientData(format!("{n} rows cannot fill {k} folds")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    if k < n {
        if let Some((c, members)) = by_class.iter().enumerate().find(|(_, m)| !m.is_empty() && m.len() < k) {
            return Err(Error::InsufficientData(format!(
                "class {c} has {} members, fewer than k = {k}",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; n];
    let mut pos = 0;
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldAssignment { k, folds })
}

/// Where a synthetic SMOTE row came from: `seed + lambda * (neighbor - seed)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub seed_row: usize,
    pub neighbor_row: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteResult {
    /// Original rows first, in order, then the synthetic rows.
    pub data: FeatureMatrix,
    pub n_original: usize,
    pub origins: Vec<SyntheticOrigin>,
}

/// Oversamples the minority class until both classes have equal counts.
pub fn smote_balance(data: &FeatureMatrix, k_neighbors: usize, seed: u64) -> Result<SmoteResult> {
    if k_neighbors == 0 {
        return Err(Error::invalid("k_neighbors must be at least 1"));
    }
    let counts = data.class_counts();
    let (minority, majority) = if counts[0] <= counts[1] { (0, 1) } else { (1, 0) };
    let needed = counts[majority] - counts[minority];
    let mut out = data.clone();
    if needed == 0 {
        return Ok(SmoteResult {
            data: out,
            n_original: data.n_rows(),
            origins: Vec::new(),
        });
    }
    let members: Vec<usize> = (0..data.n_rows()).filter(|&i| data.labels[i] == minority).collect();
    if members.len() <= k_neighbors {
        return Err(Error::InsufficientData(format!(
            "minority class has {} rows; SMOTE needs more than k_neighbors = {k_neighbors}",
            members.len()
        )));
    }
    let (means, stds) = models::column_scaling(data);
    let z: Vec<Vec<f64>> = members
        .iter()
        .map(|&i| {
            data.rows[i]
                .iter()
                .enumerate()
                .map(|(j, x)| (x - means[j]) / stds[j])
                .collect()
        })
        .collect();
    let neighbors: Vec<Vec<usize>> = (0..members.len())
        .map(|a| {
            let mut d: Vec<(f64, usize)> = (0..members.len())
                .filter(|&b| b != a)
                .map(|b| {
                    let dist: f64 = z[a].iter().zip(&z[b]).map(|(p, q)| (p - q) * (p - q)).sum();
                    (dist, b)
                })
                .collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.into_iter().take(k_neighbors).map(|(_, b)| b).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut origins = Vec::with_capacity(needed);
    for _ in 0..needed {
        let a = rng.random_range(0..members.len());
        let b = neighbors[a][rng.random_range(0..neighbors[a].len())];
        let lambda: f64 = rng.random();
        let (ra, rb) = (&data.rows[members[a]], &data.rows[members[b]]);
        let row: Vec<f64> = (0..data.n_features())
            .map(|j| {
                if data.kinds[j].is_nominal() {
                    ra[j]
                } else {
                    ra[j] + lambda * (rb[j] - ra[j])
                }
            })
            .collect();
        out.rows.push(row);
        out.labels.push(minority);
        origins.push(SyntheticOrigin {
            seed_row: members[a],
            neighbor_row: members[b],
            lambda,
        });
    }
    Ok(SmoteResult {
        data: out,
        n_original: data.n_rows(),
        origins,
    })
}

/// 2x2 counts with class 0 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: usize, predicted: usize) {
        match (truth == 0, predicted == 0) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> Self {
        let mut m = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p);
        }
        m
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// Precision, recall and F1 of class 0.
    pub fn positive_scores(&self) -> (f64, f64, f64) {
        let p = ratio(self.tp, self.tp + self.fp);
        let r = ratio(self.tp, self.tp + self.fn_);
        (p, r, f1(p, r))
    }

    /// Precision, recall and F1 of class 1.
    pub fn negative_scores(&self) -> (f64, f64, f64) {
        let p = ratio(self.tn, self.tn + self.fn_);
        let r = ratio(self.tn, self.tn + self.fp);
        (p, r, f1(p, r))
    }

    /// Unweighted mean over both classes of precision, recall and F1.
    pub fn macro_scores(&self) -> (f64, f64, f64) {
        let a = self.positive_scores();
        let b = self.negative_scores();
        ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0, (a.2 + b.2) / 2.0)
    }

    pub fn metrics(&self) -> Metrics {
        let (precision, recall, f1) = self.macro_scores();
        Metrics {
            precision,
            recall,
            f1,
            accuracy: self.accuracy(),
        }
    }
}

/// Macro-averaged scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub family: String,
    pub k: usize,
    pub folds: Vec<FoldMetrics>,
    pub cumulative: ConfusionMatrix,
    /// Scores of the cumulative matrix.
    pub metrics: Metrics,
    /// Unweighted mean of the per-fold scores.
    pub mean_fold_metrics: Metrics,
    pub best_fold: usize,
    /// Held-out probability of class 1 for every row.
    pub out_of_fold_proba: Vec<f64>,
    pub notes: Vec<String>,
}

impl EvaluationReport {
    pub fn best(&self) -> &FoldMetrics {
        &self.folds[self.best_fold]
    }

    /// Plain-text rendering of the cumulative matrix.
    pub fn confusion_text(&self, positive: &str, negative: &str) -> String {
        let c = &self.cumulative;
        let w = positive.len().max(negative.len()).max(9);
        format!(
            "{:w$}  {:>w$}  {:>w$}\n{:w$}  {:>w$}  {:>w$}\n{:w$}  {:>w$}  {:>w$}\n",
            "true\\pred",
            positive,
            negative,
            positive,
            c.tp,
            c.fn_,
            negative,
            c.fp,
            c.tn,
        )
    }
}

pub const SMOTE_LEAKAGE_NOTE: &str = "synthetic rows were generated before fold assignment, so a test fold can contain \
     points interpolated from its own training rows; scores are optimistic";

/// Trains on k-1 folds and tests on the held-out fold, for every fold.
pub fn evaluate_cv(spec: &ModelSpec, data: &FeatureMatrix, folds: &FoldAssignment) -> Result<EvaluationReport> {
    spec.validate()?;
    if folds.folds.len() != data.n_rows() {
        return Err(Error::invalid(format!(
            "fold assignment covers {} rows, data has {}",
            folds.folds.len(),
            data.n_rows()
        )));
    }
    let results: Vec<Result<(FoldMetrics, Vec<(usize, f64)>)>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train_idx = folds.train_indices(f);
            let test_idx = folds.test_indices(f);
            let model = models::train(spec, &data.subset_rows(&train_idx)).map_err(|e| Error::Fold {
                fold: f,
                source: Box::new(e),
            })?;
            let mut cm = ConfusionMatrix::default();
            let mut probs = Vec::with_capacity(test_idx.len());
            for &i in &test_idx {
                let p = model.predict_proba(&data.rows[i]);
                cm.record(data.labels[i], usize::from(p[1] > p[0]));
                probs.push((i, p[1]));
            }
            Ok((
                FoldMetrics {
                    fold: f,
                    n_test: test_idx.len(),
                    confusion: cm,
                    metrics: cm.metrics(),
                },
                probs,
            ))
        })
        .collect();

    let mut fold_metrics = Vec::with_capacity(folds.k);
    let mut cumulative = ConfusionMatrix::default();
    let mut oof = vec![f64::NAN; data.n_rows()];
    for r in results {
        let (fm, probs) = r?;
        cumulative.merge(&fm.confusion);
        for (i, p) in probs {
            oof[i] = p;
        }
        fold_metrics.push(fm);
    }
    let mut best_fold = 0;
    for (i, fm) in fold_metrics.iter().enumerate() {
        if fm.metrics.f1 > fold_metrics[best_fold].metrics.f1 {
            best_fold = i;
        }
    }
    let k = fold_metrics.len() as f64;
    let mean_of = |g: fn(&Metrics) -> f64| fold_metrics.iter().map(|f| g(&f.metrics)).sum::<f64>() / k;
    let mean_fold_metrics = Metrics {
        precision: mean_of(|m| m.precision),
        recall: mean_of(|m| m.recall),
        f1: mean_of(|m| m.f1),
        accuracy: mean_of(|m| m.accuracy),
    };
    let notes = vec![format!(
        "cumulative matrix counts each of the {} rows exactly once across the {} test folds",
        cumulative.total(),
        folds.k
    )];
    Ok(EvaluationReport {
        family: spec.family().label().to_string(),
        k: folds.k,
        folds: fold_metrics,
        metrics: cumulative.metrics(),
        cumulative,
        mean_fold_metrics,
        best_fold,
        out_of_fold_proba: oof,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_five_hundred_gives_even_folds() {
        let labels: Vec<usize> = (0..500).map(|i| i % 2).collect();
        let f = stratified_kfold(&labels, 10, 1).unwrap();
        for fold in 0..10 {
            let idx = f.test_indices(fold);
            assert_eq!(idx.len(), 50);
            assert_eq!(idx.iter().filter(|&&i| labels[i] == 0).count(), 25);
        }
    }

    #[test]
    fn leave_one_out_is_singleton_folds() {
        let labels = vec![0, 0, 0, 1, 1];
        let f = stratified_kfold(&labels, 5, 3).unwrap();
        assert_eq!(f.fold_sizes(), vec![1; 5]);
    }

    #[test]
    fn too_small_class_is_rejected() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1];
        assert!(stratified_kfold(&labels, 3, 0).is_err());
    }

    #[test]
    fn confusion_scores_from_counts() {
        let cm = ConfusionMatrix {
            tp: 245,
            fp: 2,
            fn_: 5,
            tn: 248,
        };
        assert_eq!(cm.total(), 500);
        assert!((cm.accuracy() - 493.0 / 500.0).abs() < 1e-15);
        let (p, r, _) = cm.positive_scores();
        assert!((p - 245.0 / 247.0).abs() < 1e-15);
        assert!((r - 245.0 / 250.0).abs() < 1e-15);
    }

    #[test]
    fn smote_balances_and_keeps_originals() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * i) as f64 % 7.0]).collect();
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i >= 30)).collect();
        let data = FeatureMatrix::numeric(&["a", "b"], rows, labels).unwrap();
        let s = smote_balance(&data, 5, 9).unwrap();
        assert_eq!(s.data.class_counts(), vec![30, 30]);
        assert_eq!(&s.data.rows[..40], &data.rows[..]);
        for (o, row) in s.origins.iter().zip(&s.data.rows[40..]) {
            let (a, b) = (&data.rows[o.seed_row], &data.rows[o.neighbor_row]);
            for j in 0..2 {
                assert!((row[j] - (a[j] + o.lambda * (b[j] - a[j]))).abs() < 1e-12);
            }
        }
    }
}
