//! The bundled UCI chronic kidney disease table and its defaults.
//!
//! 400 patients, 24 features and a `class` label with `ckd` encoded as 0 and
//! `notckd` as 1.

use crate::tabular::{parse_dataset, DataTable, Schema};
use crate::Result;

pub const SCHEMA_TOML: &str = include_str!("../data/ckd_schema.toml");
pub const DATA_CSV: &str = include_str!("../data/chronic_kidney_disease.csv");
/// Fixed inputs for the interpretability scorecard of three ensembles.
pub const REFERENCE_SCORECARD: &str = include_str!("../data/reference_scorecard.toml");

/// Label index of the positive class.
pub const CKD: usize = 0;
pub const NOT_CKD: usize = 1;

/// Feature set the classifiers are evaluated on by default.
pub const FINAL_FEATURES: [&str; 6] = ["hemo", "sc", "al", "htn", "age", "dm"];

/// Features removed after selection for low clinical relevance.
pub const DEFAULT_EXCLUSIONS: [&str; 6] = ["sg", "pcv", "sod", "pot", "rbc", "rbcc"];

/// Features a counterfactual may not change.
pub const DEFAULT_IMMUTABLES: [&str; 1] = ["age"];

pub fn schema() -> Schema {
    Schema::from_toml_str(SCHEMA_TOML).expect("bundled schema is valid")
}

pub fn load() -> Result<DataTable> {
    parse_dataset(DATA_CSV, &schema())
}

/// Measurement unit shown next to a feature.
pub fn unit(feature: &str) -> &'static str {
    match feature {
        "age" => "years",
        "bp" => "mm/Hg",
        "bgr" | "bu" | "sc" => "mg/dL",
        "sod" | "pot" => "mEq/L",
        "hemo" => "g/dL",
        "pcv" => "%",
        "wbcc" => "cells/cumm",
        "rbcc" => "millions/cmm",
        "al" | "su" => "grade",
        "sg" => "ratio",
        _ => "flag",
    }
}

/// Clinically plausible inclusive range used to validate incoming records.
pub fn plausible_range(feature: &str) -> Option<(f64, f64)> {
    Some(match feature {
        "age" => (0.0, 120.0),
        "bp" => (20.0, 250.0),
        "sg" => (1.0, 1.04),
        "al" | "su" => (0.0, 5.0),
        "bgr" => (10.0, 1000.0),
        "bu" => (1.0, 500.0),
        "sc" => (0.1, 80.0),
        "sod" => (1.0, 200.0),
        "pot" => (1.0, 50.0),
        "hemo" => (1.0, 25.0),
        "pcv" => (5.0, 70.0),
        "wbcc" => (1000.0, 30000.0),
        "rbcc" => (1.0, 10.0),
        "rbc" | "pc" | "pcc" | "ba" | "htn" | "dm" | "cad" | "appet" | "pe" | "ane" => (0.0, 1.0),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::ColumnKind;

    #[test]
    fn bundled_table_shape() {
        let t = load().unwrap();
        assert_eq!(t.n_rows(), 400);
        assert_eq!(t.schema().columns.len(), 25);
        assert_eq!(t.class_counts(), vec![250, 150]);
        let nominal = t.schema().columns.iter().filter(|c| c.kind == ColumnKind::Nominal).count();
        assert_eq!(nominal, 14);
    }

    #[test]
    fn every_feature_has_a_range() {
        for f in schema().feature_names() {
            assert!(plausible_range(&f).is_some(), "{f}");
        }
    }
}
