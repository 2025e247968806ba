//! Post-hoc explainers over any [`Predictor`](crate::models::Predictor).
//!
//! Every explainer works on the probability of one chosen class, so the same
//! code explains "probability of CKD" or a plain regression-like fixture.

mod effects;
mod lime;
mod shapley;

pub use effects::{ale, pdp, GridFunction, GridKind, DEFAULT_ALE_BINS, DEFAULT_GRID_SIZE};
pub use lime::{lime_explain, LimeEntry, LimeOptions, LocalExplanation};
pub use shapley::{
    dependence_triples, global_shapley, shapley_exact, shapley_sampled, DependencePoint, GlobalAttribution,
    ShapleyAttribution, MAX_EXACT_FEATURES,
};

use crate::models::Predictor;

pub(crate) fn output<P: Predictor + ?Sized>(model: &P, row: &[f64], class: usize) -> f64 {
    model.predict_proba(row)[class]
}

/// Compact decimal rendering: at most three decimals, trailing zeros dropped.
pub(crate) fn fmt_num(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
