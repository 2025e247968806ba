//! Regression imputation learned on complete rows.
//!
//! Features are filled one at a time in ascending order of missing fraction.
//! For every row missing feature `A`, the predictors are the features that
//! row has available at that point: its observed cells plus any feature
//! filled earlier in the order. One model is fitted per distinct predictor
//! set, on the complete rows only. Numeric targets use least squares,
//! nominal targets a (multinomial) logistic model.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::glm::{fit_multinomial, LogitOptions, MultinomialFit};
use crate::linalg::ols_with_intercept;
use crate::stats;
use crate::tabular::{Cell, ColumnKind, DataTable};
use crate::{Error, Result};

pub const MIN_COMPLETE_ROWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ImputationModel {
    Linear {
        coefficients: Vec<f64>,
        intercept: f64,
    },
    Logistic {
        /// Predictors are standardized with these before scoring.
        means: Vec<f64>,
        stds: Vec<f64>,
        fit: MultinomialFit,
    },
    Mean {
        value: f64,
    },
    Mode {
        category: usize,
    },
}

impl ImputationModel {
    pub fn is_fallback(&self) -> bool {
        matches!(self, ImputationModel::Mean { .. } | ImputationModel::Mode { .. })
    }

    fn predict(&self, x: &[f64]) -> Cell {
        match self {
            ImputationModel::Linear { coefficients, intercept } => {
                Cell::Number(intercept + x.iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>())
            }
            ImputationModel::Logistic { means, stds, fit } => {
                let z: Vec<f64> = x.iter().zip(means.iter().zip(stds)).map(|(v, (m, s))| (v - m) / s).collect();
                Cell::Category(fit.predict(&z))
            }
            ImputationModel::Mean { value } => Cell::Number(*value),
            ImputationModel::Mode { category } => Cell::Category(*category),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternModel {
    /// Predictors available to the rows this model serves, in schema order.
    pub pattern: Vec<String>,
    /// Predictors the model actually uses; constant columns are dropped.
    pub predictors: Vec<String>,
    pub model: ImputationModel,
    pub rows_served: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePlan {
    pub feature: String,
    pub kind: ColumnKind,
    pub missing_fraction: f64,
    /// Observed `[min, max]` of a numeric column; fills are clamped to it.
    pub observed_range: Option<(f64, f64)>,
    pub fallback: ImputationModel,
    pub patterns: Vec<PatternModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationPlan {
    pub schema_fingerprint: String,
    pub complete_rows: usize,
    pub order: Vec<String>,
    pub features: Vec<FeaturePlan>,
}

impl ImputationPlan {
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn model_count(&self) -> usize {
        self.features.iter().map(|f| f.patterns.len()).sum()
    }

    pub fn fallback_model_count(&self) -> usize {
        self.features
            .iter()
            .flat_map(|f| &f.patterns)
            .filter(|p| p.model.is_fallback())
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Observed,
    Imputed,
    /// Filled by the column mean or mode.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedTable {
    pub table: DataTable,
    pub provenance: Vec<Vec<Provenance>>,
}

impl ImputedTable {
    pub fn filled_count(&self) -> usize {
        self.provenance
            .iter()
            .flatten()
            .filter(|p| **p != Provenance::Observed)
            .count()
    }

    pub fn fallback_count(&self) -> usize {
        self.provenance
            .iter()
            .flatten()
            .filter(|p| **p == Provenance::Fallback)
            .count()
    }

    /// Sidecar CSV with the same header as the table and one provenance
    /// word per cell.
    pub fn mask_csv(&self) -> String {
        let names: Vec<&str> = self.table.schema().columns.iter().map(|c| c.name.as_str()).collect();
        let mut out = names.join(",");
        out.push('\n');
        for row in &self.provenance {
            let cells: Vec<&str> = row
                .iter()
                .map(|p| match p {
                    Provenance::Observed => "observed",
                    Provenance::Imputed => "imputed",
                    Provenance::Fallback => "fallback",
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn encoded(cell: Cell, levels: &[f64]) -> Option<f64> {
    match cell {
        Cell::Number(x) => Some(x),
        Cell::Category(c) => Some(levels[c]),
        Cell::Missing => None,
    }
}

fn column_fallback(table: &DataTable, col: usize) -> ImputationModel {
    let spec = &table.schema().columns[col];
    match spec.kind {
        ColumnKind::Numeric => {
            let obs: Vec<f64> = table.numeric_column(col).into_iter().flatten().collect();
            ImputationModel::Mean {
                value: if obs.is_empty() { 0.0 } else { stats::mean(&obs) },
            }
        }
        ColumnKind::Nominal => {
            let mut counts = vec![0usize; spec.categories.len()];
            for row in table.rows() {
                if let Cell::Category(c) = row[col] {
                    counts[c] += 1;
                }
            }
            let mut best = 0;
            for (k, &n) in counts.iter().enumerate() {
                if n > counts[best] {
                    best = k;
                }
            }
            ImputationModel::Mode { category: best }
        }
    }
}

fn fit_pattern(
    table: &DataTable,
    complete: &[usize],
    target: usize,
    pattern: &[usize],
    levels: &[Vec<f64>],
    fallback: &ImputationModel,
) -> (Vec<usize>, ImputationModel) {
    let schema = table.schema();
    let value = |r: usize, c: usize| encoded(table.cell(r, c), &levels[c]).expect("complete row");
    // constant predictors carry no information and make the design singular
    let used: Vec<usize> = pattern
        .iter()
        .copied()
        .filter(|&c| {
            let first = value(complete[0], c);
            complete.iter().any(|&r| value(r, c) != first)
        })
        .collect();
    let x: Vec<Vec<f64>> = complete
        .iter()
        .map(|&r| used.iter().map(|&c| value(r, c)).collect())
        .collect();
    match schema.columns[target].kind {
        ColumnKind::Numeric => {
            let y: Vec<f64> = complete.iter().map(|&r| value(r, target)).collect();
            if used.is_empty() {
                return (used, ImputationModel::Mean { value: stats::mean(&y) });
            }
            match ols_with_intercept(&x, &y) {
                Some((coefficients, intercept)) => (used, ImputationModel::Linear { coefficients, intercept }),
                None => {
                    tracing::warn!(feature = %schema.columns[target].name, "rank-deficient design; using column mean");
                    (used, fallback.clone())
                }
            }
        }
        ColumnKind::Nominal => {
            let y: Vec<usize> = complete
                .iter()
                .map(|&r| match table.cell(r, target) {
                    Cell::Category(c) => c,
                    _ => unreachable!("complete row"),
                })
                .collect();
            let n_classes = schema.columns[target].categories.len();
            let distinct = {
                let mut d = y.clone();
                d.sort_unstable();
                d.dedup();
                d.len()
            };
            if used.is_empty() || distinct < 2 {
                return (used, fallback.clone());
            }
            let means: Vec<f64> = (0..used.len()).map(|j| stats::mean(&x.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
            let stds: Vec<f64> = (0..used.len())
                .map(|j| stats::std_dev(&x.iter().map(|r| r[j]).collect::<Vec<_>>()))
                .collect();
            let z: Vec<Vec<f64>> = x
                .iter()
                .map(|r| r.iter().enumerate().map(|(j, v)| (v - means[j]) / stds[j]).collect())
                .collect();
            let opts = LogitOptions {
                ridge: 1e-4,
                max_iter: 50,
                tol: 1e-8,
                cap: 30.0,
            };
            match fit_multinomial(&z, &y, n_classes, opts) {
                Ok(fit) => (used, ImputationModel::Logistic { means, stds, fit }),
                Err(e) => {
                    tracing::warn!(feature = %schema.columns[target].name, error = %e, "logistic fit failed; using column mode");
                    (used, fallback.clone())
                }
            }
        }
    }
}

/// Features with missing cells, by ascending missing fraction, ties in
/// schema order.
fn imputation_order(table: &DataTable) -> Vec<(usize, usize)> {
    let schema = table.schema();
    let mut order: Vec<(usize, usize)> = schema
        .feature_indices()
        .into_iter()
        .map(|c| (c, table.rows().iter().filter(|r| r[c].is_missing()).count()))
        .filter(|&(_, n)| n > 0)
        .collect();
    order.sort_by_key(|&(c, n)| (n, c));
    order
}

pub fn fit_imputation_plan(table: &DataTable) -> Result<ImputationPlan> {
    let schema = table.schema();
    let order = imputation_order(table);
    let complete: Vec<usize> = (0..table.n_rows())
        .filter(|&r| table.rows()[r].iter().all(|c| !c.is_missing()))
        .collect();
    if order.is_empty() {
        return Ok(ImputationPlan {
            schema_fingerprint: schema.fingerprint(),
            complete_rows: complete.len(),
            order: Vec::new(),
            features: Vec::new(),
        });
    }
    if complete.len() < MIN_COMPLETE_ROWS {
        return Err(Error::InsufficientData(format!(
            "{} complete rows; imputation needs at least {MIN_COMPLETE_ROWS}",
            complete.len()
        )));
    }
    let levels: Vec<Vec<f64>> = schema.columns.iter().map(|c| c.levels()).collect();
    let features_idx = schema.feature_indices();
    let position: HashMap<usize, usize> = order.iter().enumerate().map(|(k, &(c, _))| (c, k)).collect();
    let n = table.n_rows() as f64;

    let features: Vec<FeaturePlan> = order
        .par_iter()
        .map(|&(target, missing)| {
            let k = position[&target];
            let available = |r: usize, c: usize| {
                !table.cell(r, c).is_missing() || position.get(&c).is_some_and(|&pc| pc < k)
            };
            let mut patterns: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            for r in 0..table.n_rows() {
                if table.cell(r, target).is_missing() {
                    let p: Vec<usize> = features_idx
                        .iter()
                        .copied()
                        .filter(|&c| c != target && available(r, c))
                        .collect();
                    *patterns.entry(p).or_default() += 1;
                }
            }
            let fallback = column_fallback(table, target);
            let name = |c: &usize| schema.columns[*c].name.clone();
            let patterns: Vec<(Vec<usize>, usize)> = patterns.into_iter().collect();
            let models = patterns
                .into_par_iter()
                .map(|(pattern, rows_served)| {
                    let (used, model) = fit_pattern(table, &complete, target, &pattern, &levels, &fallback);
                    PatternModel {
                        pattern: pattern.iter().map(name).collect(),
                        predictors: used.iter().map(name).collect(),
                        model,
                        rows_served,
                    }
                })
                .collect();
            let observed_range = match schema.columns[target].kind {
                ColumnKind::Numeric => {
                    let obs: Vec<f64> = table.numeric_column(target).into_iter().flatten().collect();
                    let lo = obs.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = obs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    Some((lo, hi))
                }
                ColumnKind::Nominal => None,
            };
            FeaturePlan {
                feature: schema.columns[target].name.clone(),
                kind: schema.columns[target].kind,
                missing_fraction: missing as f64 / n,
                observed_range,
                fallback,
                patterns: models,
            }
        })
        .collect();

    Ok(ImputationPlan {
        schema_fingerprint: schema.fingerprint(),
        complete_rows: complete.len(),
        order: features.iter().map(|f| f.feature.clone()).collect(),
        features,
    })
}

pub fn apply_imputation(table: &DataTable, plan: &ImputationPlan) -> Result<ImputedTable> {
    let schema = table.schema();
    if schema.fingerprint() != plan.schema_fingerprint {
        return Err(Error::Schema("imputation plan was fitted on a different schema".into()));
    }
    let levels: Vec<Vec<f64>> = schema.columns.iter().map(|c| c.levels()).collect();
    let features_idx = schema.feature_indices();
    let mut rows: Vec<Vec<Cell>> = table.rows().to_vec();
    let mut provenance: Vec<Vec<Provenance>> = vec![vec![Provenance::Observed; schema.columns.len()]; rows.len()];
    let index = |name: &str| schema.index_of(name).ok_or_else(|| Error::UnknownColumn(name.to_string()));

    for fp in &plan.features {
        let target = index(&fp.feature)?;
        let mut by_pattern: HashMap<Vec<usize>, (&PatternModel, Vec<usize>)> = HashMap::new();
        for pm in &fp.patterns {
            let pattern = pm.pattern.iter().map(|n| index(n)).collect::<Result<Vec<_>>>()?;
            let used = pm.predictors.iter().map(|n| index(n)).collect::<Result<Vec<_>>>()?;
            by_pattern.insert(pattern, (pm, used));
        }
        for r in 0..rows.len() {
            if !rows[r][target].is_missing() {
                continue;
            }
            let pattern: Vec<usize> = features_idx
                .iter()
                .copied()
                .filter(|&c| c != target && !rows[r][c].is_missing())
                .collect();
            let (cell, flag) = match by_pattern.get(&pattern) {
                Some((pm, used)) => {
                    let x: Vec<f64> = used.iter().map(|&c| encoded(rows[r][c], &levels[c]).expect("available")).collect();
                    let flag = if pm.model.is_fallback() {
                        Provenance::Fallback
                    } else {
                        Provenance::Imputed
                    };
                    (pm.model.predict(&x), flag)
                }
                None => (fp.fallback.predict(&[]), Provenance::Fallback),
            };
            let cell = match (cell, fp.observed_range) {
                (Cell::Number(v), Some((lo, hi))) => Cell::Number(v.clamp(lo, hi)),
                (Cell::Number(v), None) => Cell::Number(v),
                (c, _) => c,
            };
            rows[r][target] = cell;
            provenance[r][target] = flag;
        }
    }
    for (r, row) in rows.iter().enumerate() {
        if let Some(c) = row.iter().position(Cell::is_missing) {
            return Err(Error::invalid(format!(
                "row {r}: column `{}` is missing and the plan has no model for it",
                schema.columns[c].name
            )));
        }
    }
    let table = DataTable::new(schema.clone(), rows)?;
    Ok(ImputedTable { table, provenance })
}

/// Fits a plan on `table` and applies it.
pub fn impute(table: &DataTable) -> Result<(ImputationPlan, ImputedTable)> {
    let plan = fit_imputation_plan(table)?;
    let out = apply_imputation(table, &plan)?;
    Ok((plan, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{parse_dataset, ColumnSpec, Schema};

    fn line_table(missing_at: &[usize]) -> DataTable {
        let schema = Schema::new(
            vec![
                ColumnSpec::numeric("x"),
                ColumnSpec::numeric("y"),
                ColumnSpec::nominal("class", ["a", "b"]),
            ],
            "class",
        )
        .unwrap();
        let mut csv = String::from("x,y,class\n");
        for i in 0..30 {
            let x = i as f64 * 0.5;
            let y = if missing_at.contains(&i) {
                "?".to_string()
            } else {
                format!("{}", 2.0 * x + 1.0)
            };
            csv.push_str(&format!("{x},{y},{}\n", if i % 2 == 0 { "a" } else { "b" }));
        }
        parse_dataset(&csv, &schema).unwrap()
    }

    #[test]
    fn recovers_exact_line() {
        // x = 5 at row 10
        let t = line_table(&[10]);
        let (plan, out) = impute(&t).unwrap();
        assert_eq!(plan.order, vec!["y"]);
        let pm = &plan.features[0].patterns[0];
        assert_eq!(pm.predictors, vec!["x"]);
        match &pm.model {
            ImputationModel::Linear { coefficients, intercept } => {
                assert!((coefficients[0] - 2.0).abs() < 1e-8);
                assert!((intercept - 1.0).abs() < 1e-8);
            }
            m => panic!("unexpected {m:?}"),
        }
        match out.table.cell(10, 1) {
            Cell::Number(v) => assert!((v - 11.0).abs() < 1e-6),
            c => panic!("{c:?}"),
        }
        assert_eq!(out.filled_count(), 1);
    }

    #[test]
    fn complete_table_gives_empty_plan() {
        let t = line_table(&[]);
        let (plan, out) = impute(&t).unwrap();
        assert!(plan.is_empty());
        assert_eq!(out.table, t);
        assert_eq!(out.filled_count(), 0);
    }

    #[test]
    fn too_few_complete_rows() {
        let t = line_table(&(0..15).collect::<Vec<_>>());
        assert!(matches!(fit_imputation_plan(&t), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn nominal_target_gets_logistic_per_pattern() {
        let schema = Schema::new(
            vec![
                ColumnSpec::numeric("age"),
                ColumnSpec::numeric("bp"),
                ColumnSpec::numeric("sc"),
                ColumnSpec::nominal("htn", ["no", "yes"]),
                ColumnSpec::nominal("class", ["ckd", "notckd"]),
            ],
            "class",
        )
        .unwrap();
        let mut csv = String::from("age,bp,sc,htn,class\n");
        for i in 0..40 {
            let bp = 60 + i * 2;
            let htn = if bp > 100 { "yes" } else { "no" };
            let sc = if i == 3 { "?".to_string() } else { format!("{}", 1 + i % 3) };
            let htn = if i == 3 || i == 30 { "?" } else { htn };
            csv.push_str(&format!("{},{bp},{sc},{htn},{}\n", 30 + i, if i % 2 == 0 { "ckd" } else { "notckd" }));
        }
        let t = parse_dataset(&csv, &schema).unwrap();
        let plan = fit_imputation_plan(&t).unwrap();
        // sc is filled first, so both htn rows see (age, bp, sc)
        assert_eq!(plan.order, vec!["sc", "htn"]);
        let htn = &plan.features[1];
        assert_eq!(htn.patterns.len(), 1);
        assert_eq!(htn.patterns[0].pattern, vec!["age", "bp", "sc"]);
        assert!(matches!(htn.patterns[0].model, ImputationModel::Logistic { .. }));
        let out = apply_imputation(&t, &plan).unwrap();
        assert_eq!(out.table.cell(30, 3), Cell::Category(1));
        assert_eq!(out.table.cell(3, 3), Cell::Category(0));
    }

    #[test]
    fn fills_are_clamped_to_observed_range() {
        let schema = Schema::new(
            vec![
                ColumnSpec::numeric("x"),
                ColumnSpec::numeric("y"),
                ColumnSpec::nominal("class", ["a", "b"]),
            ],
            "class",
        )
        .unwrap();
        let mut csv = String::from("x,y,class\n");
        for i in 0..25 {
            csv.push_str(&format!("{i},{},a\n", 3 * i));
        }
        csv.push_str("1000,?,b\n");
        let t = parse_dataset(&csv, &schema).unwrap();
        let (_, out) = impute(&t).unwrap();
        assert_eq!(out.table.cell(25, 1), Cell::Number(72.0));
    }

    #[test]
    fn unseen_pattern_uses_flagged_fallback() {
        let t = line_table(&[4]);
        let mut plan = fit_imputation_plan(&t).unwrap();
        plan.features[0].patterns.clear();
        let out = apply_imputation(&t, &plan).unwrap();
        assert_eq!(out.provenance[4][1], Provenance::Fallback);
        assert_eq!(out.fallback_count(), 1);
    }

    #[test]
    fn column_without_model_is_an_error() {
        let t = line_table(&[4]);
        let plan = fit_imputation_plan(&t).unwrap();
        let mut rows = t.rows().to_vec();
        rows[7][0] = Cell::Missing;
        let t2 = DataTable::new(t.schema().clone(), rows).unwrap();
        assert!(apply_imputation(&t2, &plan).is_err());
    }
}
