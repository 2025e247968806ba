//! Counterfactual search and contrastive (pertinent negative/positive) explanations.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::Predictor;
use crate::stats;
use crate::tabular::{FeatureKind, FeatureMatrix};
use crate::{Error, Result};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_BUDGET: usize = 2000;
pub const SPARSITY_PENALTY: f64 = 0.1;
const BISECTION_STEPS: usize = 40;
const PP_EXHAUSTIVE_MAX: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterfactualOptions {
    pub k: usize,
    pub budget: usize,
    pub sparsity_penalty: f64,
    /// Feature names that must not change.
    pub immutables: Vec<String>,
}

impl Default for CounterfactualOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            budget: DEFAULT_BUDGET,
            sparsity_penalty: SPARSITY_PENALTY,
            immutables: crate::ckd::DEFAULT_IMMUTABLES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub row: Vec<f64>,
    pub predicted_class: usize,
    /// Probability of the target class.
    pub probability: f64,
    /// MAD-weighted L1 distance to the original.
    pub distance: f64,
    pub changed: Vec<bool>,
}

impl Counterfactual {
    pub fn n_changed(&self) -> usize {
        self.changed.iter().filter(|&&c| c).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSet {
    pub feature_names: Vec<String>,
    pub original: Vec<f64>,
    pub original_class: usize,
    pub original_probability: f64,
    pub target_class: usize,
    pub counterfactuals: Vec<Counterfactual>,
    pub evaluated: usize,
    pub valid_found: usize,
}

impl CounterfactualSet {
    /// Plain-text table: the original row, then one line per counterfactual
    /// with unchanged cells shown as `-`.
    pub fn to_table(&self, class_names: &[String]) -> String {
        let name = |c: usize| class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        let mut header: Vec<String> = self.feature_names.clone();
        header.push("class".into());
        let mut lines = vec![header];
        let mut orig: Vec<String> = self.original.iter().map(|v| super::attribution::fmt_num(*v)).collect();
        orig.push(name(self.original_class));
        lines.push(orig);
        for cf in &self.counterfactuals {
            let mut l: Vec<String> = cf
                .row
                .iter()
                .zip(&cf.changed)
                .map(|(v, c)| if *c { super::attribution::fmt_num(*v) } else { "-".into() })
                .collect();
            l.push(name(cf.predicted_class));
            lines.push(l);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|j| lines.iter().map(|l| l[j].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            out.push_str(&cells.join("  "));
            out.push('\n');
            if i == 1 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
        }
        out
    }
}

/// Per-feature geometry used by the search.
struct Space {
    kinds: Vec<FeatureKind>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    scale: Vec<f64>,
    levels: Vec<Vec<f64>>,
    mutable: Vec<usize>,
}

fn resolve(names: &[String], wanted: &[String]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| names.iter().position(|n| n == w).ok_or_else(|| Error::UnknownFeature(w.clone())))
        .collect()
}

impl Space {
    fn new(reference: &FeatureMatrix, immutables: &[String]) -> Result<Self> {
        if reference.n_rows() == 0 {
            return Err(Error::invalid("reference data is empty"));
        }
        let fixed = resolve(&reference.names, immutables)?;
        let d = reference.n_features();
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        let mut scale = vec![1.0; d];
        let mut levels = vec![Vec::new(); d];
        for j in 0..d {
            let c = reference.column(j);
            lo[j] = c.iter().copied().fold(f64::INFINITY, f64::min);
            hi[j] = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mad = stats::mad(&c);
            let sd = stats::std_dev(&c);
            scale[j] = if mad > 0.0 {
                mad
            } else if sd > 0.0 {
                sd
            } else {
                1.0
            };
            if let FeatureKind::Nominal { levels: l } = &reference.kinds[j] {
                levels[j] = l.clone();
            }
        }
        let mutable: Vec<usize> = (0..d).filter(|j| !fixed.contains(j)).collect();
        if mutable.is_empty() {
            return Err(Error::NoMutableFeatures);
        }
        Ok(Self {
            kinds: reference.kinds.clone(),
            lo,
            hi,
            scale,
            levels,
            mutable,
        })
    }

    fn nominal(&self, j: usize) -> bool {
        self.kinds[j].is_nominal()
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        (0..a.len())
            .map(|j| {
                if self.nominal(j) {
                    if a[j] != b[j] {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (a[j] - b[j]).abs() / self.scale[j]
                }
            })
            .sum()
    }
}

fn candidate_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pulls each changed feature back toward the original while the class holds.
fn refine<P: Predictor + ?Sized>(model: &P, row: &[f64], cand: &mut [f64], target: usize, space: &Space) {
    for _pass in 0..2 {
        for &j in &space.mutable {
            if cand[j] == row[j] {
                continue;
            }
            let keep = cand[j];
            cand[j] = row[j];
            if model.predict(cand) == target {
                continue;
            }
            if space.nominal(j) {
                cand[j] = keep;
                continue;
            }
            // invariant: t_hi valid, t_lo invalid
            let (mut t_lo, mut t_hi) = (0.0f64, 1.0f64);
            for _ in 0..BISECTION_STEPS {
                let t = 0.5 * (t_lo + t_hi);
                cand[j] = row[j] + t * (keep - row[j]);
                if model.predict(cand) == target {
                    t_hi = t;
                } else {
                    t_lo = t;
                }
            }
            cand[j] = row[j] + t_hi * (keep - row[j]);
        }
    }
}

/// Seeded random candidates, each refined by per-feature bisection; the `k`
/// best distinct valid ones are returned. Even candidates draw changed values
/// uniformly within observed ranges, odd ones copy them from a reference row
/// the model already assigns to the target class.
pub fn counterfactual_search<P: Predictor + ?Sized>(
    model: &P,
    row: &[f64],
    target_class: usize,
    reference: &FeatureMatrix,
    opts: &CounterfactualOptions,
    seed: u64,
) -> Result<CounterfactualSet> {
    if row.len() != reference.n_features() {
        return Err(Error::invalid("row width differs from the reference data"));
    }
    if opts.budget == 0 || opts.k == 0 {
        return Err(Error::invalid("budget and k must be positive"));
    }
    let space = Space::new(reference, &opts.immutables)?;
    let p = model.predict_proba(row);
    let original_class = usize::from(p[1] > p[0]);
    let mut set = CounterfactualSet {
        feature_names: reference.names.clone(),
        original: row.to_vec(),
        original_class,
        original_probability: p[original_class],
        target_class,
        counterfactuals: Vec::new(),
        evaluated: 0,
        valid_found: 0,
    };
    if original_class == target_class {
        set.counterfactuals.push(Counterfactual {
            row: row.to_vec(),
            predicted_class: target_class,
            probability: p[target_class],
            distance: 0.0,
            changed: vec![false; row.len()],
        });
        return Ok(set);
    }

    let d = row.len();
    let m = space.mutable.len();
    let prototypes: Vec<&Vec<f64>> = reference.rows.iter().filter(|r| model.predict(r) == target_class).collect();
    let results: Vec<(usize, Vec<f64>, bool, f64)> = (0..opts.budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(candidate_seed(seed, i));
            let n_change = rng.random_range(1..=m);
            let mut cand = row.to_vec();
            let proto = (i % 2 == 1 && !prototypes.is_empty()).then(|| prototypes[rng.random_range(0..prototypes.len())]);
            for pick in sample(&mut rng, m, n_change) {
                let j = space.mutable[pick];
                cand[j] = if let Some(p) = proto {
                    p[j]
                } else if space.nominal(j) {
                    let others: Vec<f64> = space.levels[j].iter().copied().filter(|&l| l != row[j]).collect();
                    if others.is_empty() {
                        row[j]
                    } else {
                        others[rng.random_range(0..others.len())]
                    }
                } else if space.hi[j] > space.lo[j] {
                    rng.random_range(space.lo[j]..=space.hi[j])
                } else {
                    space.lo[j]
                };
            }
            let prob = model.predict_proba(&cand)[target_class];
            let valid = model.predict(&cand) == target_class;
            if valid {
                refine(model, row, &mut cand, target_class, &space);
            }
            (i, cand, valid, prob)
        })
        .collect();
    set.evaluated = results.len();

    let mut valid: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    let mut best_invalid: Option<(f64, Vec<f64>)> = None;
    for (i, cand, ok, prob) in results {
        if ok {
            let changed = (0..d).filter(|&j| cand[j] != row[j]).count();
            let obj = space.distance(&cand, row) + opts.sparsity_penalty * changed as f64;
            valid.push((obj, i, cand));
        } else if best_invalid.as_ref().is_none_or(|(p, _)| prob > *p) {
            best_invalid = Some((prob, cand));
        }
    }
    set.valid_found = valid.len();
    if valid.is_empty() {
        let (best_probability, best_attempt) = best_invalid.unwrap_or((p[target_class], row.to_vec()));
        return Err(Error::NoCounterfactual {
            best_attempt,
            best_probability,
        });
    }
    valid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, _, cand) in valid {
        if set.counterfactuals.len() == opts.k {
            break;
        }
        let duplicate = set
            .counterfactuals
            .iter()
            .any(|c| c.row.iter().zip(&cand).all(|(a, b)| (a - b).abs() < 1e-9));
        if duplicate {
            continue;
        }
        let pr = model.predict_proba(&cand);
        set.counterfactuals.push(Counterfactual {
            predicted_class: usize::from(pr[1] > pr[0]),
            probability: pr[target_class],
            distance: space.distance(&cand, row),
            changed: (0..d).map(|j| cand[j] != row[j]).collect(),
            row: cand,
        });
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CemMode {
    PertinentNegative,
    PertinentPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemResult {
    pub mode: CemMode,
    pub original_class: usize,
    pub achieved_class: usize,
    /// Probability of the achieved class.
    pub probability: f64,
    /// PN: change to add to the original row.
    pub delta: Option<Vec<f64>>,
    /// PP: features kept at their original values.
    pub retained: Option<Vec<bool>>,
    /// PP: the row with every other feature set to the background median.
    pub masked_row: Option<Vec<f64>>,
    /// Changed (PN) or retained (PP) feature count.
    pub sparsity: usize,
    /// PP only: no proper subset kept the class, so the full set is returned.
    pub full_set: bool,
}

fn masked(row: &[f64], medians: &[f64], keep: &[bool]) -> Vec<f64> {
    (0..row.len()).map(|j| if keep[j] { row[j] } else { medians[j] }).collect()
}

/// Smallest retained subset by exhaustive enumeration; ties go to the higher
/// original-class probability, then to the earlier subset in mask order.
pub fn pertinent_positive_exhaustive<P: Predictor + ?Sized>(
    model: &P,
    row: &[f64],
    medians: &[f64],
) -> Option<(Vec<bool>, f64)> {
    let d = row.len();
    let class = model.predict(row);
    for size in 1..d {
        let mut best: Option<(Vec<bool>, f64)> = None;
        for mask in 0usize..(1 << d) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let keep: Vec<bool> = (0..d).map(|j| mask >> j & 1 == 1).collect();
            let x = masked(row, medians, &keep);
            if model.predict(&x) == class {
                let p = model.predict_proba(&x)[class];
                if best.as_ref().is_none_or(|(_, bp)| p > *bp) {
                    best = Some((keep, p));
                }
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

/// Adds the feature that most raises the original-class probability until the class holds.
pub fn pertinent_positive_greedy<P: Predictor + ?Sized>(
    model: &P,
    row: &[f64],
    medians: &[f64],
) -> Option<(Vec<bool>, f64)> {
    let d = row.len();
    let class = model.predict(row);
    let mut keep = vec![false; d];
    for _ in 0..d - 1 {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..d {
            if keep[j] {
                continue;
            }
            keep[j] = true;
            let p = model.predict_proba(&masked(row, medians, &keep))[class];
            keep[j] = false;
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((j, p));
            }
        }
        let (j, p) = best?;
        keep[j] = true;
        if model.predict(&masked(row, medians, &keep)) == class {
            return Some((keep, p));
        }
    }
    None
}

pub fn cem_explain<P: Predictor + ?Sized>(
    model: &P,
    row: &[f64],
    mode: CemMode,
    background: &FeatureMatrix,
    opts: &CounterfactualOptions,
    seed: u64,
) -> Result<CemResult> {
    if background.n_rows() == 0 {
        return Err(Error::invalid("background is empty"));
    }
    let p = model.predict_proba(row);
    let original_class = usize::from(p[1] > p[0]);
    match mode {
        CemMode::PertinentNegative => {
            let wide = CounterfactualOptions {
                k: opts.budget,
                ..opts.clone()
            };
            let set = counterfactual_search(model, row, 1 - original_class, background, &wide, seed)?;
            let best = set
                .counterfactuals
                .iter()
                .min_by(|a, b| a.n_changed().cmp(&b.n_changed()).then(a.distance.total_cmp(&b.distance)))
                .ok_or_else(|| Error::Training("counterfactual search returned nothing".into()))?;
            Ok(CemResult {
                mode,
                original_class,
                achieved_class: best.predicted_class,
                probability: best.probability,
                delta: Some(best.row.iter().zip(row).map(|(a, b)| a - b).collect()),
                retained: None,
                masked_row: None,
                sparsity: best.n_changed(),
                full_set: false,
            })
        }
        CemMode::PertinentPositive => {
            let d = row.len();
            let medians: Vec<f64> = (0..d).map(|j| stats::median(&background.column(j))).collect();
            let found = if d <= PP_EXHAUSTIVE_MAX {
                pertinent_positive_exhaustive(model, row, &medians)
            } else {
                pertinent_positive_greedy(model, row, &medians)
            };
            let (keep, full_set) = match found {
                Some((k, _)) => (k, false),
                None => (vec![true; d], true),
            };
            let x = masked(row, &medians, &keep);
            let px = model.predict_proba(&x);
            let achieved = usize::from(px[1] > px[0]);
            Ok(CemResult {
                mode,
                original_class,
                achieved_class: achieved,
                probability: px[achieved],
                delta: None,
                sparsity: keep.iter().filter(|&&k| k).count(),
                retained: Some(keep),
                masked_row: Some(x),
                full_set,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Threshold;

    impl Predictor for Threshold {
        fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
            if row[0] >= 10.0 {
                [0.0, 1.0]
            } else {
                [1.0, 0.0]
            }
        }
        fn feature_importances(&self) -> Vec<f64> {
            vec![1.0, 0.0]
        }
        fn n_features(&self) -> usize {
            2
        }
    }

    fn reference() -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 * 0.5, (i % 4) as f64]).collect();
        FeatureMatrix::numeric(&["x", "other"], rows, vec![0; 40]).unwrap()
    }

    #[test]
    fn threshold_is_recovered() {
        let r = reference();
        let mad = stats::mad(&r.column(0));
        let opts = CounterfactualOptions {
            immutables: vec![],
            budget: 1000,
            ..Default::default()
        };
        let set = counterfactual_search(&Threshold, &[4.0, 1.0], 1, &r, &opts, 3).unwrap();
        let best = &set.counterfactuals[0];
        assert_eq!(best.predicted_class, 1);
        assert!(best.row[0] >= 10.0 && best.row[0] <= 10.0 + 0.01 * mad, "{:?}", best.row);
        assert_eq!(best.row[1], 1.0);
        assert!(set.counterfactuals.windows(2).all(|w| w[0].distance <= w[1].distance + 0.1 * 2.0));
    }

    #[test]
    fn already_target_class_gives_zero_change() {
        let set = counterfactual_search(&Threshold, &[12.0, 0.0], 1, &reference(), &CounterfactualOptions {
            immutables: vec![],
            ..Default::default()
        }, 0)
        .unwrap();
        assert_eq!(set.counterfactuals.len(), 1);
        assert_eq!(set.counterfactuals[0].distance, 0.0);
    }

    #[test]
    fn immutables_and_unknown_names() {
        let r = reference();
        let opts = CounterfactualOptions {
            immutables: vec!["x".into()],
            ..Default::default()
        };
        // only `other` may move and it cannot flip the class
        assert!(matches!(
            counterfactual_search(&Threshold, &[4.0, 1.0], 1, &r, &opts, 0),
            Err(Error::NoCounterfactual { .. })
        ));
        let bad = CounterfactualOptions {
            immutables: vec!["nope".into()],
            ..Default::default()
        };
        assert!(matches!(
            counterfactual_search(&Threshold, &[4.0, 1.0], 1, &r, &bad, 0),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn pertinent_positive_keeps_only_the_used_feature() {
        let r = reference();
        // median x is 9.75 (class 0); a row in class 1 needs x retained
        let res = cem_explain(&Threshold, &[15.0, 3.0], CemMode::PertinentPositive, &r, &CounterfactualOptions::default(), 0).unwrap();
        assert_eq!(res.retained, Some(vec![true, false]));
        assert_eq!(res.achieved_class, 1);
    }
}
