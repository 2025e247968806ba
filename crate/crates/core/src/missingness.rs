//! Missingness profiling and Little's MCAR test.
//!
//! The test groups rows by their pattern of observed columns, estimates the
//! grand mean and covariance by EM, and sums the Mahalanobis distances of
//! the pattern means from the EM mean:
//!
//! ```text
//! d² = Σ_j n_j (ȳ_j − μ_j)ᵀ Σ_j⁻¹ (ȳ_j − μ_j),   df = Σ_j p_j − p
//! ```
//!
//! A small p-value is evidence against MCAR.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats;
use crate::tabular::DataTable;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMissingness {
    pub feature: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessProfile {
    pub n_rows: usize,
    pub features: Vec<FeatureMissingness>,
}

impl MissingnessProfile {
    pub fn get(&self, feature: &str) -> Option<&FeatureMissingness> {
        self.features.iter().find(|f| f.feature == feature)
    }

    pub fn total_missing(&self) -> usize {
        self.features.iter().map(|f| f.count).sum()
    }
}

/// Missing count and fraction for every non-target column.
pub fn profile_missingness(table: &DataTable) -> MissingnessProfile {
    let schema = table.schema();
    let n = table.n_rows();
    let features = schema
        .feature_indices()
        .into_iter()
        .map(|c| {
            let count = table.rows().iter().filter(|r| r[c].is_missing()).count();
            FeatureMissingness {
                feature: schema.columns[c].name.clone(),
                count,
                fraction: if n == 0 { 0.0 } else { count as f64 / n as f64 },
            }
        })
        .collect();
    MissingnessProfile { n_rows: n, features }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingPattern {
    /// `true` where the column is observed.
    pub observed: Vec<bool>,
    pub rows: Vec<usize>,
}

impl MissingPattern {
    pub fn n_observed(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }
}

/// Groups rows by observed mask, in order of first appearance.
pub fn missing_patterns(rows: &[Vec<Option<f64>>]) -> Vec<MissingPattern> {
    let mut index: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut patterns: Vec<MissingPattern> = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let mask: Vec<bool> = row.iter().map(Option::is_some).collect();
        match index.get(&mask) {
            Some(&k) => patterns[k].rows.push(r),
            None => {
                index.insert(mask.clone(), patterns.len());
                patterns.push(MissingPattern {
                    observed: mask,
                    rows: vec![r],
                });
            }
        }
    }
    patterns
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmEstimate {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn ridge_of(cov: &DMatrix<f64>) -> f64 {
    let p = cov.nrows().max(1) as f64;
    1e-6 * cov.trace().abs() / p
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn regularized_inverse(block: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let mut a = block.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += ridge;
    }
    a.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular(format!("{0}x{0} pattern covariance", block.nrows())))
}

/// EM estimates of the mean and covariance of a multivariate normal with
/// missing entries. Every row must observe at least one column.
pub fn em_mvn(rows: &[Vec<Option<f64>>], max_iter: usize, tol: f64) -> Result<EmEstimate> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::InsufficientData("no rows".into()));
    }
    let p = rows[0].len();
    let patterns = missing_patterns(rows);

    let mut mean = DVector::zeros(p);
    let mut cov = DMatrix::zeros(p, p);
    for j in 0..p {
        let obs: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        if obs.len() < 2 {
            return Err(Error::InsufficientData(format!("column {j} has fewer than two observed values")));
        }
        mean[j] = stats::mean(&obs);
        cov[(j, j)] = stats::variance(&obs).max(1e-12);
    }

    let mut iterations = 0;
    let mut converged = false;
    for it in 0..max_iter {
        iterations = it + 1;
        let ridge = ridge_of(&cov);
        let mut t1 = DVector::<f64>::zeros(p);
        let mut t2 = DMatrix::<f64>::zeros(p, p);
        for pat in &patterns {
            let o: Vec<usize> = (0..p).filter(|&j| pat.observed[j]).collect();
            let m: Vec<usize> = (0..p).filter(|&j| !pat.observed[j]).collect();
            if m.is_empty() {
                for &r in &pat.rows {
                    let x = DVector::from_iterator(p, rows[r].iter().map(|v| v.expect("observed")));
                    t1 += &x;
                    t2.ger(1.0, &x, &x, 1.0);
                }
                continue;
            }
            let s_oo_inv = regularized_inverse(&submatrix(&cov, &o, &o), ridge)?;
            let s_mo = submatrix(&cov, &m, &o);
            let gain = &s_mo * &s_oo_inv;
            let c_mm = submatrix(&cov, &m, &m) - &gain * s_mo.transpose();
            for &r in &pat.rows {
                let xo = DVector::from_iterator(o.len(), o.iter().map(|&j| rows[r][j].expect("observed")));
                let mu_o = DVector::from_iterator(o.len(), o.iter().map(|&j| mean[j]));
                let mu_m = DVector::from_iterator(m.len(), m.iter().map(|&j| mean[j]));
                let xm = mu_m + &gain * (xo - mu_o);
                let mut x = DVector::zeros(p);
                for &j in &o {
                    x[j] = rows[r][j].expect("observed");
                }
                for (k, &j) in m.iter().enumerate() {
                    x[j] = xm[k];
                }
                t1 += &x;
                t2.ger(1.0, &x, &x, 1.0);
                for (a, &ja) in m.iter().enumerate() {
                    for (b, &jb) in m.iter().enumerate() {
                        t2[(ja, jb)] += c_mm[(a, b)];
                    }
                }
            }
        }
        let new_mean = t1 / n as f64;
        let mut new_cov = t2 / n as f64 - &new_mean * new_mean.transpose();
        new_cov = (&new_cov + new_cov.transpose()) * 0.5;
        let delta = (&new_mean - &mean).amax().max((&new_cov - &cov).amax());
        mean = new_mean;
        cov = new_cov;
        if delta < tol {
            converged = true;
            break;
        }
    }
    Ok(EmEstimate {
        mean,
        covariance: cov,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McarTestResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub n_patterns: usize,
    pub sample_size: usize,
    pub dropped_rows: usize,
    pub em_iterations: usize,
    pub em_converged: bool,
    pub notes: Vec<String>,
}

impl McarTestResult {
    pub fn rejects_mcar(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

pub const EM_MAX_ITER: usize = 100;
pub const EM_TOL: f64 = 1e-6;

/// Little's test on the numerically encoded features of a random
/// `sample_fraction` of the rows.
pub fn little_mcar_test(table: &DataTable, sample_fraction: f64, seed: u64) -> Result<McarTestResult> {
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::invalid("sample fraction must lie in (0, 1]"));
    }
    let (_, rows) = table.features_with_missing();
    let n = rows.len();
    let take = ((sample_fraction * n as f64).round() as usize).clamp(1, n.max(1));
    let sample: Vec<Vec<Option<f64>>> = if take == n {
        rows
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, take).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| rows[i].clone()).collect()
    };
    little_mcar_test_rows(&sample)
}

/// Little's test on raw rows with explicit gaps.
pub fn little_mcar_test_rows(rows: &[Vec<Option<f64>>]) -> Result<McarTestResult> {
    let mut notes = Vec::new();
    let kept: Vec<&Vec<Option<f64>>> = rows.iter().filter(|r| r.iter().any(Option::is_some)).collect();
    let dropped = rows.len() - kept.len();
    if dropped > 0 {
        tracing::warn!(dropped, "rows with no observed value dropped from the MCAR test");
        notes.push(format!("{dropped} rows with every variable missing were dropped"));
    }
    if kept.is_empty() {
        return Err(Error::TestUndefined("no rows with observed values".into()));
    }
    let p = kept[0].len();

    // centre and scale each column so the ridge is commensurate across units
    let mut scaled: Vec<Vec<Option<f64>>> = kept.iter().map(|r| (*r).clone()).collect();
    for j in 0..p {
        let obs: Vec<f64> = scaled.iter().filter_map(|r| r[j]).collect();
        if obs.is_empty() {
            return Err(Error::TestUndefined(format!("column {j} is never observed")));
        }
        let m = stats::mean(&obs);
        let s = stats::std_dev(&obs);
        let s = if s > 0.0 { s } else { 1.0 };
        for r in scaled.iter_mut() {
            if let Some(v) = r[j].as_mut() {
                *v = (*v - m) / s;
            }
        }
    }

    let patterns = missing_patterns(&scaled);
    if patterns.len() < 2 {
        return Err(Error::TestUndefined(format!(
            "{} missingness pattern(s); at least two are required",
            patterns.len()
        )));
    }
    let em = em_mvn(&scaled, EM_MAX_ITER, EM_TOL)?;
    if !em.converged {
        notes.push(format!("EM stopped after {EM_MAX_ITER} iterations without meeting tolerance {EM_TOL:e}"));
    }
    let ridge = ridge_of(&em.covariance);
    let mut statistic = 0.0;
    let mut df_sum = 0usize;
    for pat in &patterns {
        let o: Vec<usize> = (0..p).filter(|&j| pat.observed[j]).collect();
        df_sum += o.len();
        let inv = regularized_inverse(&submatrix(&em.covariance, &o, &o), ridge)?;
        let nj = pat.rows.len() as f64;
        let diff = DVector::from_iterator(
            o.len(),
            o.iter().map(|&j| {
                let s: f64 = pat.rows.iter().map(|&r| scaled[r][j].expect("observed")).sum();
                s / nj - em.mean[j]
            }),
        );
        statistic += nj * (diff.transpose() * &inv * &diff)[(0, 0)];
    }
    let df = df_sum.saturating_sub(p);
    if df == 0 {
        return Err(Error::TestUndefined("zero degrees of freedom".into()));
    }
    let statistic = statistic.max(0.0);
    notes.push("a p-value below the significance level rejects the MCAR hypothesis".into());
    Ok(McarTestResult {
        statistic,
        degrees_of_freedom: df,
        p_value: stats::chi2_sf(statistic, df),
        n_patterns: patterns.len(),
        sample_size: kept.len(),
        dropped_rows: dropped,
        em_iterations: em.iterations,
        em_converged: em.converged,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{parse_dataset, ColumnSpec, Schema};

    #[test]
    fn profile_counts_and_fractions() {
        let schema = Schema::new(vec![ColumnSpec::numeric("x"), ColumnSpec::nominal("y", ["a", "b"])], "y").unwrap();
        let t = parse_dataset("x,y\n1,a\n?,b\n3,a\n4,b\n", &schema).unwrap();
        let p = profile_missingness(&t);
        assert_eq!(p.features.len(), 1);
        assert_eq!(p.features[0].count, 1);
        assert_eq!(p.features[0].fraction, 0.25);
    }

    #[test]
    fn patterns_partition_rows() {
        let rows = vec![
            vec![Some(1.0), None],
            vec![Some(1.0), Some(2.0)],
            vec![None, Some(2.0)],
            vec![Some(3.0), None],
        ];
        let pats = missing_patterns(&rows);
        assert_eq!(pats.len(), 3);
        assert_eq!(pats[0].rows, vec![0, 3]);
        let total: usize = pats.iter().map(|p| p.rows.len()).sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn em_on_complete_data_is_sample_moments() {
        let rows: Vec<Vec<Option<f64>>> = (0..10).map(|i| vec![Some(i as f64), Some((i * i) as f64)]).collect();
        let em = em_mvn(&rows, 100, 1e-9).unwrap();
        assert!((em.mean[0] - 4.5).abs() < 1e-12);
        assert!((em.covariance[(0, 0)] - 8.25).abs() < 1e-9);
    }

    #[test]
    fn single_pattern_is_undefined() {
        let rows: Vec<Vec<Option<f64>>> = (0..10).map(|i| vec![Some(i as f64), Some(1.0 - i as f64)]).collect();
        assert!(matches!(little_mcar_test_rows(&rows), Err(Error::TestUndefined(_))));
    }

    #[test]
    fn rows_missing_everything_are_dropped() {
        let mut rows: Vec<Vec<Option<f64>>> = (0..30)
            .map(|i| {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 1.3).cos();
                vec![Some(a), if i % 4 == 0 { None } else { Some(b) }]
            })
            .collect();
        rows.push(vec![None, None]);
        let res = little_mcar_test_rows(&rows).unwrap();
        assert_eq!(res.dropped_rows, 1);
        assert_eq!(res.sample_size, 30);
        assert_eq!(res.degrees_of_freedom, 1);
    }
}
