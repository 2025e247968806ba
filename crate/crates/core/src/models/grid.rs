use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::resampling::{evaluate_cv, FoldAssignment};
use crate::tabular::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub spec: ModelSpec,
    /// Cumulative macro F1, or `None` when the cell failed.
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: ModelSpec,
    pub best_score: f64,
    pub cells: Vec<GridCell>,
}

/// Exhaustive search by cross-validated F1; the earliest cell wins ties.
pub fn grid_search(specs: &[ModelSpec], data: &FeatureMatrix, folds: &FoldAssignment) -> Result<GridSearchResult> {
    if specs.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let mut cells = Vec::with_capacity(specs.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, spec) in specs.iter().enumerate() {
        match evaluate_cv(spec, data, folds) {
            Ok(report) => {
                let f1 = report.metrics.f1;
                if best.is_none_or(|(_, s)| f1 > s) {
                    best = Some((i, f1));
                }
                cells.push(GridCell {
                    spec: spec.clone(),
                    f1: Some(f1),
                    accuracy: Some(report.metrics.accuracy),
                    error: None,
                });
            }
            Err(e) => {
                tracing::warn!(cell = i, error = %e, "grid cell failed");
                cells.push(GridCell {
                    spec: spec.clone(),
                    f1: None,
                    accuracy: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let (i, score) = best.ok_or_else(|| Error::Training("every grid cell failed".into()))?;
    Ok(GridSearchResult {
        best: specs[i].clone(),
        best_score: score,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Family, Hyperparameters, RandomForestParams};
    use crate::resampling::stratified_kfold;

    #[test]
    fn single_cell_is_returned_and_failures_are_skipped() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![if i < 20 { i as f64 } else { i as f64 + 100.0 }]).collect();
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let data = FeatureMatrix::numeric(&["x"], rows, labels).unwrap();
        let folds = stratified_kfold(&data.labels, 4, 0).unwrap();
        let good = ModelSpec::default_for(Family::Dt, 0);
        let r = grid_search(std::slice::from_ref(&good), &data, &folds).unwrap();
        assert_eq!(r.best, good);
        assert_eq!(r.best_score, 1.0);

        let bad = ModelSpec::new(
            Hyperparameters::Rf(RandomForestParams {
                n_estimators: 0,
                ..Default::default()
            }),
            0,
        );
        let r = grid_search(&[bad.clone(), good.clone()], &data, &folds).unwrap();
        assert_eq!(r.best, good);
        assert!(r.cells[0].error.is_some());
        assert!(grid_search(&[bad], &data, &folds).is_err());
    }
}
