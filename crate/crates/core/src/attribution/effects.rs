//! Partial dependence and accumulated local effects.

use serde::{Deserialize, Serialize};

use super::output;
use crate::models::Predictor;
use crate::stats;
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 20;
pub const DEFAULT_ALE_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Pdp1,
    Pdp2,
    Ale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub kind: GridKind,
    pub features: Vec<String>,
    pub units: Vec<String>,
    /// One strictly increasing axis per feature.
    pub grid: Vec<Vec<f64>>,
    /// 1-D: one value per grid point. 2-D: row-major over `grid[0] x grid[1]`.
    pub values: Vec<f64>,
    /// ALE only: rows per bin (`grid[0].len() - 1` entries).
    pub bin_counts: Option<Vec<usize>>,
    pub class: usize,
}

impl GridFunction {
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            GridKind::Pdp2 => self.values[i * self.grid[1].len() + j],
            _ => self.values[i],
        }
    }

    pub fn spread(&self) -> f64 {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Grid point with the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

fn numeric_column(data: &FeatureMatrix, j: usize) -> Result<Vec<f64>> {
    if j >= data.n_features() {
        return Err(Error::invalid(format!("feature index {j} out of range")));
    }
    if data.kinds[j].is_nominal() {
        return Err(Error::invalid(format!(
            "`{}` is nominal; effect curves need a numeric feature",
            data.names[j]
        )));
    }
    if data.n_rows() == 0 {
        return Err(Error::InsufficientData("no rows".into()));
    }
    Ok(data.column(j))
}

fn percentile_grid(col: &[f64], size: usize) -> Vec<f64> {
    let s = stats::sorted(col);
    let size = size.max(2);
    let mut g: Vec<f64> = (0..size)
        .map(|k| stats::quantile_sorted(&s, k as f64 / (size - 1) as f64))
        .collect();
    g.dedup();
    g
}

fn unit_of(name: &str) -> String {
    crate::ckd::unit(name).to_string()
}

/// Mean prediction with one or two features clamped to each grid point.
pub fn pdp<P: Predictor + ?Sized>(
    model: &P,
    data: &FeatureMatrix,
    features: &[usize],
    grid_size: usize,
    class: usize,
) -> Result<GridFunction> {
    if features.is_empty() || features.len() > 2 {
        return Err(Error::invalid("PDP takes one or two features"));
    }
    let axes: Vec<Vec<f64>> = features
        .iter()
        .map(|&j| numeric_column(data, j).map(|c| percentile_grid(&c, grid_size)))
        .collect::<Result<_>>()?;
    let n = data.n_rows() as f64;
    let avg = |setting: &[(usize, f64)]| -> f64 {
        let mut x = vec![0.0; data.n_features()];
        let mut total = 0.0;
        for r in &data.rows {
            x.copy_from_slice(r);
            for &(j, v) in setting {
                x[j] = v;
            }
            total += output(model, &x, class);
        }
        total / n
    };
    let values: Vec<f64> = if features.len() == 1 {
        axes[0].iter().map(|&v| avg(&[(features[0], v)])).collect()
    } else {
        let mut out = Vec::with_capacity(axes[0].len() * axes[1].len());
        for &a in &axes[0] {
            for &b in &axes[1] {
                out.push(avg(&[(features[0], a), (features[1], b)]));
            }
        }
        out
    };
    Ok(GridFunction {
        kind: if features.len() == 1 { GridKind::Pdp1 } else { GridKind::Pdp2 },
        features: features.iter().map(|&j| data.names[j].clone()).collect(),
        units: features.iter().map(|&j| unit_of(&data.names[j])).collect(),
        grid: axes,
        values,
        bin_counts: None,
        class,
    })
}

/// First-order ALE on quantile bins. Values sit on the bin edges and are
/// centred so that the count-weighted mean of the bin midpoints is zero.
pub fn ale<P: Predictor + ?Sized>(
    model: &P,
    data: &FeatureMatrix,
    feature: usize,
    n_bins: usize,
    class: usize,
) -> Result<GridFunction> {
    if n_bins < 2 {
        return Err(Error::invalid("ALE needs at least two bins"));
    }
    let col = numeric_column(data, feature)?;
    let s = stats::sorted(&col);
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|k| stats::quantile_sorted(&s, k as f64 / n_bins as f64))
        .collect();
    let before = edges.len();
    edges.dedup();
    if edges.len() < before {
        tracing::warn!(
            feature = %data.names[feature],
            "{} quantile edges collapsed; bins merged",
            before - edges.len()
        );
    }
    if edges.len() < 2 {
        return Err(Error::InsufficientData(format!("`{}` is constant", data.names[feature])));
    }
    let k = edges.len() - 1;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut x = vec![0.0; data.n_features()];
    for r in &data.rows {
        let v = r[feature];
        // bin b covers (edges[b], edges[b+1]]; the first bin also takes edges[0]
        let b = edges[1..k].iter().filter(|&&e| v > e).count();
        x.copy_from_slice(r);
        x[feature] = edges[b + 1];
        let hi = output(model, &x, class);
        x[feature] = edges[b];
        let lo = output(model, &x, class);
        sums[b] += hi - lo;
        counts[b] += 1;
    }
    let mut acc = vec![0.0; k + 1];
    for b in 0..k {
        let step = if counts[b] > 0 { sums[b] / counts[b] as f64 } else { 0.0 };
        acc[b + 1] = acc[b] + step;
    }
    let total: usize = counts.iter().sum();
    let centre: f64 = (0..k)
        .map(|b| counts[b] as f64 * (acc[b] + acc[b + 1]) / 2.0)
        .sum::<f64>()
        / total as f64;
    let values = acc.iter().map(|a| a - centre).collect();
    Ok(GridFunction {
        kind: GridKind::Ale,
        features: vec![data.names[feature].clone()],
        units: vec![unit_of(&data.names[feature])],
        grid: vec![edges],
        values,
        bin_counts: Some(counts),
        class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scaled(f64);

    impl Predictor for Scaled {
        fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
            [1.0 - self.0 * row[0], self.0 * row[0]]
        }
        fn feature_importances(&self) -> Vec<f64> {
            vec![1.0, 0.0]
        }
        fn n_features(&self) -> usize {
            2
        }
    }

    fn data() -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.37).sin() * 4.0, i as f64]).collect();
        FeatureMatrix::numeric(&["x", "z"], rows, vec![0; 50]).unwrap()
    }

    #[test]
    fn pdp_of_identity_is_identity_and_ignored_feature_is_flat() {
        let d = data();
        let p = pdp(&Scaled(1.0), &d, &[0], 20, 1).unwrap();
        for (g, v) in p.grid[0].iter().zip(&p.values) {
            assert!((g - v).abs() < 1e-12);
        }
        assert!(pdp(&Scaled(1.0), &d, &[1], 20, 1).unwrap().spread() < 1e-9);
        let two = pdp(&Scaled(1.0), &d, &[0, 1], 5, 1).unwrap();
        assert_eq!(two.values.len(), 25);
    }

    #[test]
    fn ale_slope_and_centering() {
        let d = data();
        let a = ale(&Scaled(3.0), &d, 0, 10, 1).unwrap();
        let g = &a.grid[0];
        for i in 1..g.len() {
            let slope = (a.values[i] - a.values[i - 1]) / (g[i] - g[i - 1]);
            assert!((slope - 3.0).abs() < 1e-6);
        }
        let c = a.bin_counts.as_ref().unwrap();
        let m: f64 = (0..c.len()).map(|b| c[b] as f64 * (a.values[b] + a.values[b + 1]) / 2.0).sum();
        assert!(m.abs() < 1e-9);
        assert!(ale(&Scaled(3.0), &d, 1, 10, 1).unwrap().spread() < 1e-12);
    }
}
