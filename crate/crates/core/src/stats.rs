//! Small descriptive-statistics helpers shared across modules.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by n).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Linear-interpolation quantile (R type 7) of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(xs), q)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Median absolute deviation around the median (unscaled).
pub fn mad(xs: &[f64]) -> f64 {
    let m = median(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    median(&dev)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Shannon entropy in bits of a count distribution.
pub fn entropy_bits<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Entropy (bits) of the empirical distinct-value distribution.
pub fn value_entropy_bits(xs: &[f64]) -> f64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for x in xs {
        // normalise -0.0 so it shares a bucket with 0.0
        let key = if *x == 0.0 { 0.0f64 } else { *x };
        *counts.entry(key.to_bits()).or_default() += 1;
    }
    entropy_bits(counts.into_values())
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(statistic: f64, df: usize) -> f64 {
    if df == 0 {
        return if statistic > 0.0 { 0.0 } else { 1.0 };
    }
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    dist.sf(statistic.max(0.0)).clamp(0.0, 1.0)
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_normal_p(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * n.sf(z.abs())).clamp(0.0, 1.0)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Indices sorted by descending value, ties broken by index.
pub fn argsort_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Round half away from zero at two decimals, for display.
pub fn round2(x: f64) -> f64 {
    // nudge by a few ulps so 0.675 stored as 0.67499999 still rounds up
    let scaled = x * 100.0;
    let nudged = scaled + scaled.signum() * 1e-9;
    nudged.round() / 100.0
}

/// Truncate toward zero at two decimals, for display.
pub fn trunc2(x: f64) -> f64 {
    let scaled = x * 100.0;
    (scaled + scaled.signum() * 1e-9).trunc() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_variance() {
        assert_eq!(variance(&[1.0, 3.0]), 1.0);
        assert!((std_dev(&[2.0, 4.0, 6.0]) - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 100.0]), 1.0);
    }

    #[test]
    fn entropy_of_fair_coin_is_one_bit() {
        assert!((entropy_bits([5, 5]) - 1.0).abs() < 1e-12);
        assert_eq!(entropy_bits([7]), 0.0);
        assert!((value_entropy_bits(&[0.0, 1.0, 0.0, 1.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_tail_matches_known_values() {
        // P(chi2_1 > 3.841459) = 0.05
        assert!((chi2_sf(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
        assert!((two_sided_normal_p(1.959_963_984_540_054) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn rounding_modes() {
        assert_eq!(round2(0.875), 0.88);
        assert_eq!(trunc2(0.875), 0.87);
        assert_eq!(round2(0.6666), 0.67);
        assert_eq!(trunc2(0.8333), 0.83);
        assert_eq!(round2(0.7000000000000001), 0.7);
    }

    #[test]
    fn pearson_degenerate_is_none() {
        assert!(pearson(&[1.0, 1.0], &[0.0, 1.0]).is_none());
        assert_eq!(pearson(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]), Some(1.0));
    }
}
