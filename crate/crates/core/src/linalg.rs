//! Thin wrappers around `nalgebra` for the handful of dense solves we need.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Builds a dense matrix from row slices.
pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Solves `a x = b` for symmetric positive definite `a`, falling back to LU.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())))
}

/// Inverse of a symmetric positive definite matrix.
pub fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.inverse());
    }
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix", a.nrows(), a.ncols())))
}

/// Ordinary least squares with an intercept column appended last.
///
/// Returns `(slopes, intercept)`, or `None` if the design is rank deficient.
pub fn ols_with_intercept(x: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = x.len();
    let p = x.first().map_or(0, |r| r.len());
    if n < p + 1 {
        return None;
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j < p { x[i][j] } else { 1.0 });
    let target = DVector::from_column_slice(y);
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * (n.max(p + 1) as f64);
    if svd.singular_values.iter().any(|&s| s <= tol) {
        return None;
    }
    let beta = svd.solve(&target, tol).ok()?;
    Some((beta.rows(0, p).iter().copied().collect(), beta[p]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let (b, c) = ols_with_intercept(&x, &y).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-10);
        assert!((c - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ols_detects_collinearity() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(ols_with_intercept(&x, &y).is_none());
    }

    #[test]
    fn spd_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = inverse_spd(&a).unwrap();
        let id = &a * inv;
        assert!((id[(0, 0)] - 1.0).abs() < 1e-12 && id[(0, 1)].abs() < 1e-12);
    }
}
