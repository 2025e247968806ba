//! Maximum-likelihood logistic models fitted by Newton-Raphson.
//!
//! Binary fits report standard errors from the inverse observed information.
//! Multinomial fits use the first present class as reference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{inverse_spd, solve_spd};
use crate::stats::sigmoid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitOptions {
    /// L2 penalty on slopes (intercept unpenalized). Zero gives plain ML.
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Coefficients are clamped to `±cap` once separation is detected.
    pub cap: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            max_iter: 100,
            tol: 1e-10,
            cap: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// NaN where the information matrix could not be inverted.
    pub std_errors: Vec<f64>,
    pub intercept_se: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub separation: bool,
}

impl LogitFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let z: f64 = self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>();
        sigmoid(z)
    }
}

fn design(x: &[Vec<f64>], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), p + 1, |i, j| if j < p { x[i][j] } else { 1.0 })
}

fn check_inputs(x: &[Vec<f64>], n_targets: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InsufficientData("no rows".into()));
    }
    if x.len() != n_targets {
        return Err(Error::invalid("rows and targets differ in length"));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::invalid("ragged design matrix"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    Ok(p)
}

fn penalized_loglik(xd: &DMatrix<f64>, y: &[f64], w: &[f64], beta: &DVector<f64>, ridge: f64) -> f64 {
    let eta = xd * beta;
    let p = beta.len() - 1;
    let mut ll = 0.0;
    for i in 0..y.len() {
        let z = eta[i];
        // log(1 + e^z) computed stably
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        ll += w[i] * (y[i] * z - softplus);
    }
    ll - 0.5 * ridge * beta.rows(0, p).norm_squared()
}

/// Binary logistic regression. `y` holds 0/1 targets; `weights` default to 1.
pub fn fit_logistic(x: &[Vec<f64>], y: &[f64], weights: Option<&[f64]>, opts: LogitOptions) -> Result<LogitFit> {
    let p = check_inputs(x, y.len())?;
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("binary targets must be 0 or 1"));
    }
    let ones = vec![1.0; y.len()];
    let w = weights.unwrap_or(&ones);
    let xd = design(x, p);
    let mut beta = DVector::<f64>::zeros(p + 1);
    let mut ll = penalized_loglik(&xd, y, w, &beta, opts.ridge);
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let eta = &xd * &beta;
        let mut grad = DVector::<f64>::zeros(p + 1);
        let mut hess = DMatrix::<f64>::zeros(p + 1, p + 1);
        for i in 0..y.len() {
            let pi = sigmoid(eta[i]);
            let row = xd.row(i).transpose();
            grad.axpy(w[i] * (y[i] - pi), &row, 1.0);
            hess.ger(w[i] * pi * (1.0 - pi), &row, &row, 1.0);
        }
        for j in 0..p {
            grad[j] -= opts.ridge * beta[j];
            hess[(j, j)] += opts.ridge;
        }
        let step = match solve_spd(&hess, &grad) {
            Ok(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                separation = true;
                break;
            }
        };
        // step halving keeps the penalized likelihood non-decreasing
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + &step * t;
            let cand_ll = penalized_loglik(&xd, y, w, &cand, opts.ridge);
            if cand_ll >= ll - 1e-12 {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        if beta.iter().any(|b| b.abs() > opts.cap) {
            separation = true;
            break;
        }
        if (&step * t).amax() < opts.tol {
            converged = true;
            break;
        }
    }
    if !separation && opts.ridge == 0.0 {
        // fitted probabilities pinned at 0/1 mean the MLE does not exist
        let eta = &xd * &beta;
        let perfect = (0..y.len()).all(|i| {
            let pi = sigmoid(eta[i]);
            (y[i] - pi).abs() < 1e-6
        });
        separation = perfect;
    }
    if separation {
        tracing::debug!("logistic fit shows separation; coefficients capped at ±{}", opts.cap);
        for b in beta.iter_mut() {
            *b = b.clamp(-opts.cap, opts.cap);
        }
        ll = penalized_loglik(&xd, y, w, &beta, opts.ridge);
    }

    let eta = &xd * &beta;
    let mut info = DMatrix::<f64>::zeros(p + 1, p + 1);
    for i in 0..y.len() {
        let pi = sigmoid(eta[i]);
        let row = xd.row(i).transpose();
        info.ger(w[i] * pi * (1.0 - pi), &row, &row, 1.0);
    }
    for j in 0..p {
        info[(j, j)] += opts.ridge;
    }
    let se: Vec<f64> = match inverse_spd(&info) {
        Ok(cov) => (0..=p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        Err(_) => vec![f64::NAN; p + 1],
    };
    Ok(LogitFit {
        coefficients: beta.rows(0, p).iter().copied().collect(),
        intercept: beta[p],
        std_errors: se[..p].to_vec(),
        intercept_se: se[p],
        log_likelihood: ll,
        iterations,
        converged,
        separation,
    })
}

/// Softmax regression over `n_classes` labels. Classes absent from `y`
/// receive probability zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialFit {
    pub n_classes: usize,
    /// Classes seen during fitting; the first is the reference.
    pub present: Vec<usize>,
    /// One coefficient row (slopes then intercept) per present class.
    pub coefficients: Vec<Vec<f64>>,
}

impl MultinomialFit {
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = self
            .coefficients
            .iter()
            .map(|c| {
                let p = c.len() - 1;
                c[p] + row.iter().zip(&c[..p]).map(|(x, b)| x * b).sum::<f64>()
            })
            .collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let mut out = vec![0.0; self.n_classes];
        for (k, &c) in self.present.iter().enumerate() {
            out[c] = exps[k] / z;
        }
        out
    }

    /// Most probable class, ties to the lowest index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let p = self.predict_proba(row);
        let mut best = 0;
        for (k, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = k;
            }
        }
        best
    }
}

pub fn fit_multinomial(x: &[Vec<f64>], y: &[usize], n_classes: usize, opts: LogitOptions) -> Result<MultinomialFit> {
    let p = check_inputs(x, y.len())?;
    if y.iter().any(|&c| c >= n_classes) {
        return Err(Error::invalid("class label out of range"));
    }
    let mut present: Vec<usize> = y.to_vec();
    present.sort_unstable();
    present.dedup();
    let k = present.len();
    if k < 2 {
        return Err(Error::InsufficientData("fewer than two classes present".into()));
    }
    let code: Vec<usize> = y.iter().map(|c| present.binary_search(c).expect("present")).collect();
    let xd = design(x, p);
    let n = y.len();
    let q = p + 1;
    let free = (k - 1) * q;
    // columns of theta are the non-reference classes
    let mut theta = DMatrix::<f64>::zeros(q, k - 1);

    let probabilities = |theta: &DMatrix<f64>| -> DMatrix<f64> {
        let s = &xd * theta;
        DMatrix::from_fn(n, k, |i, c| {
            let m = (0..k - 1).map(|a| s[(i, a)]).fold(0.0f64, f64::max);
            let z: f64 = (-m).exp() + (0..k - 1).map(|a| (s[(i, a)] - m).exp()).sum::<f64>();
            let v = if c == 0 { -m } else { s[(i, c - 1)] - m };
            v.exp() / z
        })
    };
    let objective = |theta: &DMatrix<f64>| -> f64 {
        let pr = probabilities(theta);
        let ll: f64 = (0..n).map(|i| pr[(i, code[i])].max(1e-300).ln()).sum();
        let pen: f64 = theta.rows(0, p).norm_squared();
        ll - 0.5 * opts.ridge * pen
    };

    let mut ll = objective(&theta);
    for _ in 0..opts.max_iter {
        let pr = probabilities(&theta);
        let mut grad = DVector::<f64>::zeros(free);
        let mut hess = DMatrix::<f64>::zeros(free, free);
        for a in 1..k {
            let resid = DVector::from_fn(n, |i, _| (if code[i] == a { 1.0 } else { 0.0 }) - pr[(i, a)]);
            let g = xd.transpose() * resid;
            grad.rows_mut((a - 1) * q, q).copy_from(&g);
            for b in a..k {
                let w = DVector::from_fn(n, |i, _| pr[(i, a)] * ((if a == b { 1.0 } else { 0.0 }) - pr[(i, b)]));
                let mut xw = xd.clone();
                for (i, mut row) in xw.row_iter_mut().enumerate() {
                    row *= w[i];
                }
                let block = xd.transpose() * xw;
                hess.view_mut(((a - 1) * q, (b - 1) * q), (q, q)).copy_from(&block);
                if a != b {
                    hess.view_mut(((b - 1) * q, (a - 1) * q), (q, q)).copy_from(&block.transpose());
                }
            }
        }
        for c in 0..k - 1 {
            for j in 0..p {
                grad[c * q + j] -= opts.ridge * theta[(j, c)];
                hess[(c * q + j, c * q + j)] += opts.ridge;
            }
        }
        let step = match solve_spd(&hess, &grad) {
            Ok(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => break,
        };
        let step = DMatrix::from_column_slice(q, k - 1, step.as_slice());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &theta + &step * t;
            let cand_ll = objective(&cand);
            if cand_ll >= ll - 1e-12 {
                theta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || (&step * t).amax() < opts.tol {
            break;
        }
        if theta.amax() > opts.cap {
            tracing::debug!("multinomial fit shows separation; coefficients capped at ±{}", opts.cap);
            break;
        }
    }
    let mut coefficients = vec![vec![0.0; q]];
    for c in 0..k - 1 {
        coefficients.push((0..q).map(|j| theta[(j, c)].clamp(-opts.cap, opts.cap)).collect());
    }
    Ok(MultinomialFit {
        n_classes,
        present,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let p = sigmoid(0.5 + 1.5 * a - b);
            y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
            x.push(vec![a, b]);
        }
        (x, y)
    }

    #[test]
    fn recovers_known_coefficients() {
        let (x, y) = synthetic(20_000, 1);
        let fit = fit_logistic(&x, &y, None, LogitOptions::default()).unwrap();
        assert!(fit.converged && !fit.separation);
        assert!((fit.coefficients[0] - 1.5).abs() < 0.1, "{:?}", fit.coefficients);
        assert!((fit.coefficients[1] + 1.0).abs() < 0.1);
        assert!((fit.intercept - 0.5).abs() < 0.1);
        // se shrinks like 1/sqrt(n)
        assert!(fit.std_errors[0] < 0.05);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let (x, y) = synthetic(500, 2);
        let fit = fit_logistic(&x, &y, None, LogitOptions::default()).unwrap();
        let mut g = [0.0; 3];
        for (r, &t) in x.iter().zip(&y) {
            let e = t - fit.predict(r);
            g[0] += e * r[0];
            g[1] += e * r[1];
            g[2] += e;
        }
        assert!(g.iter().all(|v| v.abs() < 1e-7), "{g:?}");
    }

    #[test]
    fn separable_data_is_flagged_and_capped() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
        let fit = fit_logistic(&x, &y, None, LogitOptions::default()).unwrap();
        assert!(fit.separation);
        assert!(fit.coefficients[0].abs() <= 30.0);
        assert!(fit.predict(&[19.0]) > 0.5 && fit.predict(&[0.0]) < 0.5);
    }

    #[test]
    fn multinomial_learns_three_bands() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..90 {
            let v = i as f64 / 10.0;
            x.push(vec![v]);
            y.push(if v < 3.0 { 0 } else if v < 6.0 { 2 } else { 3 });
        }
        let fit = fit_multinomial(&x, &y, 4, LogitOptions { ridge: 1e-3, ..Default::default() }).unwrap();
        assert_eq!(fit.predict(&[1.0]), 0);
        assert_eq!(fit.predict(&[4.5]), 2);
        assert_eq!(fit.predict(&[8.0]), 3);
        let p = fit.predict_proba(&[4.5]);
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
