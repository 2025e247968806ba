//! Local surrogate explanations on quartile indicators.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{fmt_num, output};
use crate::linalg::solve_spd;
use crate::models::Predictor;
use crate::stats;
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeOptions {
    pub n_samples: usize,
    /// Defaults to `0.75 * sqrt(d)`.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
}

impl Default for LimeOptions {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            kernel_width: None,
            ridge: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeEntry {
    pub feature: String,
    pub value: f64,
    /// Interval of the explained value, e.g. `hemo <= 10.9`.
    pub condition: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub class: usize,
    pub probability: f64,
    pub predicted_class: usize,
    pub intercept: f64,
    pub fidelity_r2: f64,
    pub kernel_width: f64,
    pub entries: Vec<LimeEntry>,
}

impl LocalExplanation {
    /// Entries by descending `|weight|`.
    pub fn ranked(&self) -> Vec<&LimeEntry> {
        let mut v: Vec<&LimeEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()));
        v
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }
}

enum Column {
    Numeric { mean: f64, std: f64, quartiles: [f64; 3] },
    Nominal { values: Vec<f64> },
}

impl Column {
    fn bin(&self, x: f64) -> usize {
        match self {
            Column::Numeric { quartiles, .. } => quartiles.iter().filter(|&&q| x > q).count(),
            Column::Nominal { .. } => 0,
        }
    }
}

fn condition(name: &str, col: &Column, x: f64) -> String {
    match col {
        Column::Numeric { quartiles: q, .. } => match col.bin(x) {
            0 => format!("{name} <= {}", fmt_num(q[0])),
            3 => format!("{name} > {}", fmt_num(q[2])),
            b => format!("{} < {name} <= {}", fmt_num(q[b - 1]), fmt_num(q[b])),
        },
        Column::Nominal { .. } => format!("{name} = {}", fmt_num(x)),
    }
}

/// Explains `P(class)` at `row` with a kernel-weighted ridge surrogate whose
/// inputs indicate "same quartile as the explained value" (or "same level").
pub fn lime_explain<P: Predictor + ?Sized>(
    model: &P,
    row: &[f64],
    background: &FeatureMatrix,
    class: usize,
    opts: &LimeOptions,
    seed: u64,
) -> Result<LocalExplanation> {
    let d = background.n_features();
    if background.n_rows() == 0 {
        return Err(Error::invalid("background is empty"));
    }
    if row.len() != d {
        return Err(Error::invalid("row width differs from the background"));
    }
    if opts.n_samples < 100 {
        return Err(Error::invalid("LIME needs at least 100 samples"));
    }
    let cols: Vec<Column> = (0..d)
        .map(|j| {
            let c = background.column(j);
            if background.kinds[j].is_nominal() {
                Column::Nominal { values: c }
            } else {
                let s = stats::sorted(&c);
                let sd = stats::std_dev(&c);
                Column::Numeric {
                    mean: stats::mean(&c),
                    std: if sd > 0.0 { sd } else { 1.0 },
                    quartiles: [0.25, 0.5, 0.75].map(|q| stats::quantile_sorted(&s, q)),
                }
            }
        })
        .collect();
    let width = opts.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row_bins: Vec<usize> = (0..d).map(|j| cols[j].bin(row[j])).collect();

    let n = opts.n_samples;
    let mut z = DMatrix::<f64>::zeros(n, d + 1);
    let mut y = DVector::<f64>::zeros(n);
    let mut w = DVector::<f64>::zeros(n);
    let mut x = vec![0.0; d];
    for i in 0..n {
        // first sample is the instance itself
        if i == 0 {
            x.copy_from_slice(row);
        } else {
            for j in 0..d {
                x[j] = match &cols[j] {
                    Column::Numeric { mean, std, .. } => Normal::new(*mean, *std)
                        .map_err(|e| Error::invalid(e.to_string()))?
                        .sample(&mut rng),
                    Column::Nominal { values } => values[rng.random_range(0..values.len())],
                };
            }
        }
        let mut dist2 = 0.0;
        for j in 0..d {
            let (ind, gap) = match &cols[j] {
                Column::Numeric { std, .. } => (cols[j].bin(x[j]) == row_bins[j], (x[j] - row[j]) / std),
                Column::Nominal { .. } => {
                    let same = x[j] == row[j];
                    (same, if same { 0.0 } else { 1.0 })
                }
            };
            z[(i, j)] = if ind { 1.0 } else { 0.0 };
            dist2 += gap * gap;
        }
        z[(i, d)] = 1.0;
        y[i] = output(model, &x, class);
        w[i] = (-dist2 / (width * width)).exp();
    }

    let mut zw = z.clone();
    for i in 0..n {
        zw.row_mut(i).scale_mut(w[i]);
    }
    let mut gram = z.transpose() * &zw;
    for j in 0..d {
        gram[(j, j)] += opts.ridge;
    }
    let rhs = zw.transpose() * &y;
    let beta = solve_spd(&gram, &rhs).map_err(|_| Error::Singular("LIME surrogate system".into()))?;

    let fitted = &z * &beta;
    let wsum = w.sum();
    let ybar = w.dot(&y) / wsum;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for i in 0..n {
        ss_res += w[i] * (y[i] - fitted[i]).powi(2);
        ss_tot += w[i] * (y[i] - ybar).powi(2);
    }
    let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };

    let p = model.predict_proba(row);
    let entries = (0..d)
        .map(|j| LimeEntry {
            feature: background.names[j].clone(),
            value: row[j],
            condition: condition(&background.names[j], &cols[j], row[j]),
            weight: beta[j],
        })
        .collect();
    Ok(LocalExplanation {
        class,
        probability: p[class],
        predicted_class: usize::from(p[1] > p[0]),
        intercept: beta[d],
        fidelity_r2: r2,
        kernel_width: width,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(Vec<f64>);

    impl Predictor for Linear {
        fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
            let f: f64 = row.iter().zip(&self.0).map(|(a, b)| a * b).sum();
            [1.0 - f, f]
        }
        fn feature_importances(&self) -> Vec<f64> {
            vec![0.5, 0.5]
        }
        fn n_features(&self) -> usize {
            self.0.len()
        }
    }

    fn background() -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 20) as f64, ((i * 7) % 13) as f64]).collect();
        FeatureMatrix::numeric(&["a", "b"], rows, vec![0; 200]).unwrap()
    }

    #[test]
    fn quartile_conditions_are_rendered() {
        let bg = background();
        let e = lime_explain(&Linear(vec![0.1, -0.1]), &[19.0, 0.0], &bg, 1, &LimeOptions::default(), 1).unwrap();
        assert!(e.entries[0].condition.starts_with("a > "), "{}", e.entries[0].condition);
        assert!(e.entries[1].condition.starts_with("b <= "), "{}", e.entries[1].condition);
        // high a raises f; low b also raises f, so both indicators carry positive weight
        assert!(e.entries[0].weight > 0.0 && e.entries[1].weight > 0.0);
        assert!((0.0..=1.0).contains(&e.fidelity_r2));
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let opts = LimeOptions {
            n_samples: 10,
            ..Default::default()
        };
        assert!(lime_explain(&Linear(vec![1.0, 1.0]), &[1.0, 1.0], &background(), 1, &opts, 0).is_err());
    }
}
