//! Filter, statistical and wrapper feature selection, combined by majority vote.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::glm::{fit_logistic, LogitOptions};
use crate::models::{Hyperparameters, LogisticParams, LogisticRegression, ModelSpec};
use crate::resampling::{evaluate_cv, stratified_kfold};
use crate::stats;
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

pub const CORRELATION_THRESHOLD: f64 = 0.5;
pub const LOGIT_ALPHA: f64 = 0.005;
pub const IG_BINS: usize = 10;
pub const IG_TOP_K: usize = 10;
pub const VARIANCE_THRESHOLD: f64 = 0.75;
pub const WRAPPER_TARGET: usize = 10;
pub const FORWARD_TOLERANCE: f64 = 1e-4;
pub const FORWARD_FOLDS: usize = 5;
pub const MIN_VOTES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub score: f64,
    pub selected: bool,
}

fn labels_f64(m: &FeatureMatrix) -> Vec<f64> {
    m.labels.iter().map(|&l| l as f64).collect()
}

/// Signed Pearson correlation with the 0/1 target, sorted by descending `|r|`.
///
/// Zero-variance features have no correlation and are left out.
pub fn correlation_with_target(m: &FeatureMatrix, threshold: f64) -> Vec<FeatureScore> {
    let y = labels_f64(m);
    let mut out: Vec<FeatureScore> = Vec::new();
    for (j, name) in m.names.iter().enumerate() {
        match stats::pearson(&m.column(j), &y) {
            Some(r) => out.push(FeatureScore {
                feature: name.clone(),
                score: r,
                selected: r.abs() >= threshold,
            }),
            None => tracing::warn!(feature = %name, "zero variance, correlation undefined"),
        }
    }
    out.sort_by(|a, b| b.score.abs().total_cmp(&a.score.abs()));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitTerm {
    pub feature: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitReport {
    pub alpha: f64,
    pub terms: Vec<LogitTerm>,
    pub intercept: f64,
    pub converged: bool,
    pub separation: bool,
    pub notes: Vec<String>,
}

impl LogitReport {
    pub fn significant(&self) -> Vec<String> {
        self.terms.iter().filter(|t| t.significant).map(|t| t.feature.clone()).collect()
    }
}

/// Unpenalized maximum-likelihood logit with Wald tests; significant means `p < alpha`.
pub fn logit_significance(m: &FeatureMatrix, alpha: f64) -> Result<LogitReport> {
    // fit on z-scores so the separation cap is scale-free; Wald tests are unchanged
    let (means, stds) = crate::models::column_scaling(m);
    let z: Vec<Vec<f64>> = m
        .rows
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, x)| (x - means[j]) / stds[j]).collect())
        .collect();
    let fit = fit_logistic(&z, &labels_f64(m), None, LogitOptions::default())?;
    let mut notes = Vec::new();
    if fit.separation {
        notes.push("separation detected: coefficients capped at +/-30, Wald tests are unreliable".to_string());
    }
    if !fit.converged {
        notes.push(format!("Newton iterations did not converge after {}", fit.iterations));
    }
    let terms = m
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = fit.std_errors[j] / stds[j];
            let coefficient = fit.coefficients[j] / stds[j];
            let t = fit.coefficients[j] / fit.std_errors[j];
            let p = if t.is_finite() { stats::two_sided_normal_p(t) } else { f64::NAN };
            LogitTerm {
                feature: name.clone(),
                coefficient,
                std_error: se,
                t_value: t,
                p_value: p,
                significant: p < alpha,
            }
        })
        .collect();
    Ok(LogitReport {
        alpha,
        terms,
        intercept: fit.intercept - (0..m.n_features()).map(|j| fit.coefficients[j] * means[j] / stds[j]).sum::<f64>(),
        converged: fit.converged,
        separation: fit.separation,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoGain {
    pub feature: String,
    pub information_gain: f64,
    /// Entropy of the feature's distinct-value distribution.
    pub entropy: f64,
}

/// Bin index of every value using equal-frequency cut points.
pub fn equal_frequency_bins(xs: &[f64], bins: usize) -> Vec<usize> {
    let sorted = stats::sorted(xs);
    let mut edges: Vec<f64> = (1..bins)
        .map(|k| stats::quantile_sorted(&sorted, k as f64 / bins as f64))
        .collect();
    edges.dedup();
    xs.iter().map(|x| edges.iter().filter(|&&e| e < *x).count()).collect()
}

fn conditional_entropy(groups: &[usize], labels: &[usize]) -> f64 {
    let mut by_group: BTreeMap<usize, [usize; 2]> = BTreeMap::new();
    for (&g, &l) in groups.iter().zip(labels) {
        by_group.entry(g).or_default()[l.min(1)] += 1;
    }
    let n = labels.len() as f64;
    by_group
        .values()
        .map(|c| (c[0] + c[1]) as f64 / n * stats::entropy_bits(c.iter().copied()))
        .sum()
}

/// Information gain of every feature, highest first (ties keep column order); top `k` returned.
///
/// Numeric features are cut into [`IG_BINS`] equal-frequency bins; nominal
/// features use their levels directly.
pub fn information_gain_ranking(m: &FeatureMatrix, top_k: usize) -> Vec<InfoGain> {
    let counts = m.class_counts();
    let h = stats::entropy_bits(counts.iter().copied());
    let mut all: Vec<InfoGain> = (0..m.n_features())
        .map(|j| {
            let col = m.column(j);
            let groups: Vec<usize> = if m.kinds[j].is_nominal() {
                let levels: BTreeSet<u64> = col.iter().map(|x| x.to_bits()).collect();
                let levels: Vec<u64> = levels.into_iter().collect();
                col.iter().map(|x| levels.binary_search(&x.to_bits()).unwrap_or(0)).collect()
            } else {
                equal_frequency_bins(&col, IG_BINS)
            };
            InfoGain {
                feature: m.names[j].clone(),
                information_gain: (h - conditional_entropy(&groups, &m.labels)).max(0.0),
                entropy: stats::value_entropy_bits(&col),
            }
        })
        .collect();
    all.sort_by(|a, b| b.information_gain.total_cmp(&a.information_gain));
    all.truncate(top_k);
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub threshold: f64,
    pub kept: Vec<String>,
    pub dropped: Vec<(String, f64)>,
    pub variances: Vec<(String, f64)>,
}

/// Keeps features whose population variance is at least `threshold`.
pub fn variance_threshold(m: &FeatureMatrix, threshold: f64) -> VarianceReport {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut variances = Vec::new();
    for (j, name) in m.names.iter().enumerate() {
        let v = stats::variance(&m.column(j));
        variances.push((name.clone(), v));
        if v >= threshold {
            kept.push(name.clone());
        } else {
            dropped.push((name.clone(), v));
        }
    }
    VarianceReport {
        threshold,
        kept,
        dropped,
        variances,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WrapperMode {
    Forward,
    Rfe,
}

fn cv_accuracy(m: &FeatureMatrix, cols: &[usize], params: &LogisticParams, folds: &crate::resampling::FoldAssignment) -> f64 {
    let spec = ModelSpec::new(Hyperparameters::Lr(params.clone()), 0);
    match evaluate_cv(&spec, &m.select_indices(cols), folds) {
        Ok(r) => r.metrics.accuracy,
        Err(e) => {
            tracing::warn!(error = %e, "wrapper candidate failed");
            f64::NEG_INFINITY
        }
    }
}

/// Forward selection on cross-validated accuracy, or recursive elimination on
/// standardized coefficient magnitude. Returned names keep column order.
pub fn wrapper_select(
    m: &FeatureMatrix,
    mode: WrapperMode,
    params: &LogisticParams,
    target_size: usize,
    seed: u64,
) -> Result<Vec<String>> {
    let d = m.n_features();
    if d == 1 {
        return Ok(m.names.clone());
    }
    if target_size == 0 || target_size >= d {
        return Err(Error::invalid(format!(
            "target size {target_size} must lie in [1, {d}) for {d} features"
        )));
    }
    let chosen: Vec<usize> = match mode {
        WrapperMode::Forward => {
            let folds = stratified_kfold(&m.labels, FORWARD_FOLDS, seed)?;
            let mut chosen: Vec<usize> = Vec::new();
            let mut best_acc = f64::NEG_INFINITY;
            while chosen.len() < target_size {
                let mut step: Option<(usize, f64)> = None;
                for j in (0..d).filter(|j| !chosen.contains(j)) {
                    let mut cols = chosen.clone();
                    cols.push(j);
                    cols.sort_unstable();
                    let acc = cv_accuracy(m, &cols, params, &folds);
                    if step.is_none_or(|(_, a)| acc > a) {
                        step = Some((j, acc));
                    }
                }
                let Some((j, acc)) = step else { break };
                if acc - best_acc < FORWARD_TOLERANCE {
                    break;
                }
                chosen.push(j);
                best_acc = acc;
            }
            chosen
        }
        WrapperMode::Rfe => {
            let mut cols: Vec<usize> = (0..d).collect();
            while cols.len() > target_size {
                let model = LogisticRegression::fit(params, &m.select_indices(&cols))?;
                let coef = model.standardized_coefficients();
                // smallest magnitude goes; on ties the later column goes
                let mut drop = 0;
                for k in 1..cols.len() {
                    if coef[k].abs() <= coef[drop].abs() {
                        drop = k;
                    }
                }
                cols.remove(drop);
            }
            cols
        }
    };
    let mut chosen = chosen;
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|j| m.names[j].clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub method_sets: BTreeMap<String, Vec<String>>,
    /// Number of methods selecting each feature, in schema order.
    pub votes: Vec<(String, usize)>,
    pub min_votes: usize,
    pub consensus: Vec<String>,
    pub exclusions: Vec<String>,
    pub final_set: Vec<String>,
    pub notes: Vec<String>,
}

/// Features chosen by at least [`MIN_VOTES`] methods, minus the exclusions.
///
/// `feature_order` lists every valid feature; outputs follow that order so the
/// result does not depend on how the method sets were supplied.
pub fn consensus_select(
    method_sets: &BTreeMap<String, Vec<String>>,
    exclusions: &[String],
    feature_order: &[String],
) -> Result<SelectionReport> {
    if method_sets.len() < 2 {
        return Err(Error::invalid("consensus needs at least two method sets"));
    }
    for f in method_sets.values().flatten().chain(exclusions) {
        if !feature_order.contains(f) {
            return Err(Error::UnknownFeature(f.clone()));
        }
    }
    let votes: Vec<(String, usize)> = feature_order
        .iter()
        .map(|f| {
            let v = method_sets.values().filter(|s| s.contains(f)).count();
            (f.clone(), v)
        })
        .collect();
    let consensus: Vec<String> = votes
        .iter()
        .filter(|(_, v)| *v >= MIN_VOTES)
        .map(|(f, _)| f.clone())
        .collect();
    let final_set: Vec<String> = consensus.iter().filter(|f| !exclusions.contains(f)).cloned().collect();
    if final_set.is_empty() {
        return Err(Error::InsufficientData("no feature survives consensus and exclusions".into()));
    }
    Ok(SelectionReport {
        method_sets: method_sets.clone(),
        votes,
        min_votes: MIN_VOTES,
        consensus,
        exclusions: exclusions.to_vec(),
        final_set,
        notes: Vec::new(),
    })
}

/// `|found ∩ reference| / |reference|`.
pub fn set_overlap(found: &[String], reference: &[&str]) -> f64 {
    if reference.is_empty() {
        return 1.0;
    }
    let hits = reference.iter().filter(|r| found.iter().any(|f| f == *r)).count();
    hits as f64 / reference.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub correlation_threshold: f64,
    pub logit_alpha: f64,
    pub ig_top_k: usize,
    pub variance_threshold: f64,
    pub forward_max: usize,
    pub rfe_target: usize,
    pub wrapper_model: LogisticParams,
    pub exclusions: Vec<String>,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            correlation_threshold: CORRELATION_THRESHOLD,
            logit_alpha: LOGIT_ALPHA,
            ig_top_k: IG_TOP_K,
            variance_threshold: VARIANCE_THRESHOLD,
            forward_max: WRAPPER_TARGET,
            rfe_target: WRAPPER_TARGET,
            wrapper_model: LogisticParams::default(),
            exclusions: crate::ckd::DEFAULT_EXCLUSIONS.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }
}

/// Everything the six methods computed, plus the consensus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullSelection {
    pub correlation: Vec<FeatureScore>,
    pub logit: LogitReport,
    pub information_gain: Vec<InfoGain>,
    pub variance: VarianceReport,
    pub forward: Vec<String>,
    pub rfe: Vec<String>,
    pub report: SelectionReport,
}

/// Runs all six methods concurrently and combines them.
pub fn run_selection(m: &FeatureMatrix, cfg: &SelectionConfig) -> Result<FullSelection> {
    let ((correlation, logit), ((information_gain, variance), (forward, rfe))) = rayon::join(
        || {
            (
                correlation_with_target(m, cfg.correlation_threshold),
                logit_significance(m, cfg.logit_alpha),
            )
        },
        || {
            rayon::join(
                || {
                    (
                        information_gain_ranking(m, cfg.ig_top_k),
                        variance_threshold(m, cfg.variance_threshold),
                    )
                },
                || {
                    rayon::join(
                        || wrapper_select(m, WrapperMode::Forward, &cfg.wrapper_model, cfg.forward_max, cfg.seed),
                        || wrapper_select(m, WrapperMode::Rfe, &cfg.wrapper_model, cfg.rfe_target, cfg.seed),
                    )
                },
            )
        },
    );
    let logit = logit?;
    let (forward, rfe) = (forward?, rfe?);
    let mut sets = BTreeMap::new();
    sets.insert(
        "correlation".to_string(),
        correlation.iter().filter(|s| s.selected).map(|s| s.feature.clone()).collect(),
    );
    sets.insert("logit".to_string(), logit.significant());
    sets.insert(
        "information_gain".to_string(),
        information_gain.iter().map(|g| g.feature.clone()).collect(),
    );
    sets.insert("variance".to_string(), variance.kept.clone());
    sets.insert("forward".to_string(), forward.clone());
    sets.insert("rfe".to_string(), rfe.clone());
    let mut report = consensus_select(&sets, &cfg.exclusions, &m.names)?;
    report.notes.extend(logit.notes.iter().cloned());
    Ok(FullSelection {
        correlation,
        logit,
        information_gain,
        variance,
        forward,
        rfe,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn correlation_of_target_copy_and_negation() {
        let labels = vec![0, 1, 0, 1, 1, 0];
        let rows: Vec<Vec<f64>> = labels.iter().map(|&l| vec![l as f64, 1.0 - l as f64, 3.0]).collect();
        let m = FeatureMatrix::numeric(&["same", "neg", "flat"], rows, labels).unwrap();
        let c = correlation_with_target(&m, 0.5);
        assert_eq!(c.len(), 2);
        let get = |n: &str| c.iter().find(|s| s.feature == n).unwrap().score;
        assert!((get("same") - 1.0).abs() < 1e-12);
        assert!((get("neg") + 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_feature_has_full_gain_and_binary_entropy_is_one_bit() {
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1];
        let rows: Vec<Vec<f64>> = labels.iter().map(|&l| vec![l as f64 * 10.0]).collect();
        let m = FeatureMatrix::numeric(&["x"], rows, labels).unwrap();
        let g = &information_gain_ranking(&m, 1)[0];
        assert!((g.information_gain - 1.0).abs() < 1e-12);
        assert!((g.entropy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variance_threshold_drops_constant() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0]).collect();
        let m = FeatureMatrix::numeric(&["a", "c"], rows, (0..10).map(|i| i % 2).collect()).unwrap();
        let r = variance_threshold(&m, 0.75);
        assert_eq!(r.kept, names(&["a"]));
        assert_eq!(r.dropped[0].1, 0.0);
    }

    #[test]
    fn consensus_counts_votes_and_applies_exclusions() {
        let order = names(&["a", "b", "c", "d"]);
        let mut sets = BTreeMap::new();
        sets.insert("m1".to_string(), names(&["a", "b"]));
        sets.insert("m2".to_string(), names(&["b", "c", "a"]));
        sets.insert("m3".to_string(), names(&["d"]));
        let r = consensus_select(&sets, &names(&["b"]), &order).unwrap();
        assert_eq!(r.consensus, names(&["a", "b"]));
        assert_eq!(r.final_set, names(&["a"]));
        assert!(consensus_select(&sets, &names(&["zz"]), &order).is_err());
    }

    #[test]
    fn single_feature_wrapper_returns_it() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let m = FeatureMatrix::numeric(&["x"], rows, (0..20).map(|i| usize::from(i > 9)).collect()).unwrap();
        for mode in [WrapperMode::Forward, WrapperMode::Rfe] {
            assert_eq!(wrapper_select(&m, mode, &LogisticParams::default(), 1, 0).unwrap(), names(&["x"]));
        }
    }
}
