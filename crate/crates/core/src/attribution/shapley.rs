//! Interventional Shapley values against a background sample.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output;
use crate::models::Predictor;
use crate::{Error, Result};

/// Exact enumeration visits `2^d` coalitions.
pub const MAX_EXACT_FEATURES: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyAttribution {
    pub phi: Vec<f64>,
    /// Mean model output over the background.
    pub base_value: f64,
    /// Model output for the explained row.
    pub prediction: f64,
    pub class: usize,
    /// `None` for exact enumeration.
    pub n_permutations: Option<usize>,
}

impl ShapleyAttribution {
    /// `base_value + sum(phi) - prediction`.
    pub fn efficiency_gap(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - self.prediction
    }
}

fn check(row: &[f64], background: &[Vec<f64>]) -> Result<()> {
    if background.is_empty() {
        return Err(Error::invalid("background is empty"));
    }
    if background.iter().any(|b| b.len() != row.len()) {
        return Err(Error::invalid("background rows differ in width from the explained row"));
    }
    Ok(())
}

fn mean_output<P: Predictor + ?Sized>(model: &P, background: &[Vec<f64>], class: usize) -> f64 {
    background.iter().map(|b| output(model, b, class)).sum::<f64>() / background.len() as f64
}

/// Exact Shapley values by enumerating every coalition.
pub fn shapley_exact<P: Predictor + ?Sized>(
    model: &P,
    row: &[f64],
    background: &[Vec<f64>],
    class: usize,
) -> Result<ShapleyAttribution> {
    check(row, background)?;
    let d = row.len();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::invalid(format!(
            "{d} features exceed the exact limit of {MAX_EXACT_FEATURES}; use sampled mode"
        )));
    }
    let n_sets = 1usize << d;
    let values: Vec<f64> = (0..n_sets)
        .into_par_iter()
        .map(|mask| {
            let mut x = vec![0.0; d];
            let mut total = 0.0;
            for b in background {
                for j in 0..d {
                    x[j] = if mask >> j & 1 == 1 { row[j] } else { b[j] };
                }
                total += output(model, &x, class);
            }
            total / background.len() as f64
        })
        .collect();
    // weight(|S|) = |S|! (d - |S| - 1)! / d!
    let mut weight = vec![0.0; d];
    for (s, w) in weight.iter_mut().enumerate() {
        let mut v = 1.0 / d as f64;
        // 1 / (d * C(d-1, s))
        for k in 0..s {
            v *= (k + 1) as f64 / (d - 1 - k) as f64;
        }
        *w = v;
    }
    let mut phi = vec![0.0; d];
    for mask in 0..n_sets {
        let size = (mask as u64).count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask >> j & 1 == 0 {
                *p += weight[size] * (values[mask | 1 << j] - values[mask]);
            }
        }
    }
    Ok(ShapleyAttribution {
        phi,
        base_value: values[0],
        prediction: values[n_sets - 1],
        class,
        n_permutations: None,
    })
}

/// Permutation-sampling estimate; each permutation is paired with its reverse
/// and a random background row.
pub fn shapley_sampled<P: Predictor + ?Sized>(
    model: &P,
    row: &[f64],
    background: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
    class: usize,
) -> Result<ShapleyAttribution> {
    check(row, background)?;
    if n_permutations < 64 {
        return Err(Error::invalid("at least 64 permutations are required"));
    }
    let d = row.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = vec![0.0; d];
    let mut order: Vec<usize> = (0..d).collect();
    let mut done = 0;
    let mut x = vec![0.0; d];
    while done < n_permutations {
        order.shuffle(&mut rng);
        let z = &background[rng.random_range(0..background.len())];
        for pass in 0..2 {
            if done == n_permutations {
                break;
            }
            x.copy_from_slice(z);
            let mut prev = output(model, &x, class);
            let walk: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
                Box::new(order.iter())
            } else {
                Box::new(order.iter().rev())
            };
            for &j in walk {
                x[j] = row[j];
                let cur = output(model, &x, class);
                phi[j] += cur - prev;
                prev = cur;
            }
            done += 1;
        }
    }
    for p in phi.iter_mut() {
        *p /= n_permutations as f64;
    }
    Ok(ShapleyAttribution {
        phi,
        base_value: mean_output(model, background, class),
        prediction: output(model, row, class),
        class,
        n_permutations: Some(n_permutations),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalAttribution {
    pub feature_names: Vec<String>,
    /// Mean `|phi|` per feature.
    pub mean_abs_phi: Vec<f64>,
    pub rows: Vec<ShapleyAttribution>,
}

impl GlobalAttribution {
    /// Feature indices by descending mean `|phi|`, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        crate::stats::argsort_desc(&self.mean_abs_phi)
    }
}

/// Shapley values for many rows; exact when the width allows, sampled otherwise.
pub fn global_shapley<P: Predictor + ?Sized>(
    model: &P,
    rows: &[Vec<f64>],
    background: &[Vec<f64>],
    feature_names: &[String],
    class: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<GlobalAttribution> {
    let d = feature_names.len();
    let per_row: Vec<ShapleyAttribution> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if d <= MAX_EXACT_FEATURES.min(10) {
                shapley_exact(model, r, background, class)
            } else {
                shapley_sampled(model, r, background, n_permutations, seed.wrapping_add(i as u64), class)
            }
        })
        .collect::<Result<_>>()?;
    let mut mean_abs_phi = vec![0.0; d];
    for a in &per_row {
        for (m, p) in mean_abs_phi.iter_mut().zip(&a.phi) {
            *m += p.abs();
        }
    }
    let n = per_row.len().max(1) as f64;
    for m in mean_abs_phi.iter_mut() {
        *m /= n;
    }
    Ok(GlobalAttribution {
        feature_names: feature_names.to_vec(),
        mean_abs_phi,
        rows: per_row,
    })
}

/// One point of a dependence scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependencePoint {
    pub value: f64,
    pub phi: f64,
    pub color: f64,
}

pub fn dependence_triples(
    rows: &[Vec<f64>],
    attributions: &[ShapleyAttribution],
    feature: usize,
    color_feature: usize,
) -> Vec<DependencePoint> {
    rows.iter()
        .zip(attributions)
        .map(|(r, a)| DependencePoint {
            value: r[feature],
            phi: a.phi[feature],
            color: r[color_feature],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Additive;

    impl Predictor for Additive {
        fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
            let f = row[0] * row[0] + 2.0 * row[1] - row[2].sin();
            [1.0 - f, f]
        }
        fn feature_importances(&self) -> Vec<f64> {
            vec![1.0 / 3.0; 3]
        }
        fn n_features(&self) -> usize {
            3
        }
    }

    #[test]
    fn additive_closed_form() {
        let bg: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.3, -(i as f64), (i as f64).sqrt()]).collect();
        let row = [1.5, 2.0, 0.4];
        let a = shapley_exact(&Additive, &row, &bg, 1).unwrap();
        let g = [
            |x: f64| x * x,
            |x: f64| 2.0 * x,
            |x: f64| -x.sin(),
        ];
        for j in 0..3 {
            let mean: f64 = bg.iter().map(|b| g[j](b[j])).sum::<f64>() / bg.len() as f64;
            assert!((a.phi[j] - (g[j](row[j]) - mean)).abs() < 1e-9);
        }
        assert!(a.efficiency_gap().abs() < 1e-12);
    }

    #[test]
    fn sampled_is_deterministic_and_close() {
        let bg: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64 * 0.1, (i % 3) as f64 * 0.1, i as f64 * 0.05]).collect();
        let row = [0.3, 0.2, 0.5];
        let a = shapley_sampled(&Additive, &row, &bg, 512, 3, 1).unwrap();
        let b = shapley_sampled(&Additive, &row, &bg, 512, 3, 1).unwrap();
        assert_eq!(a, b);
        let e = shapley_exact(&Additive, &row, &bg, 1).unwrap();
        for j in 0..3 {
            assert!((a.phi[j] - e.phi[j]).abs() < 0.05);
        }
    }
}
