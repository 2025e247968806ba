//! Interpretable machine learning for tabular clinical prediction.
//!
//! The crate covers the whole path from a raw CSV with `?` markers to an
//! interpretability scorecard:
//!
//! * [`tabular`]: schema-checked ingestion, standardization and model encoding
//! * [`missingness`]: missingness profiles and Little's MCAR test
//! * [`imputation`]: per-pattern regression imputation learned on complete rows
//! * [`selection`]: filter, statistical and wrapper feature selection plus consensus
//! * [`resampling`]: SMOTE, stratified k-fold and cross-validated evaluation
//! * [`models`]: from-scratch classifiers behind the [`models::Predictor`] trait
//! * [`attribution`]: LIME-style surrogates, Shapley values, PDP and ALE
//! * [`counterfactual`]: counterfactual search and contrastive explanations
//! * [`metrics`]: interpretability, external fidelity and composite indices
//! * [`pipeline`]: configuration and stage orchestration used by the CLI
//!
//! The bundled UCI chronic kidney disease table is available through [`ckd`].

pub mod attribution;
pub mod ckd;
pub mod counterfactual;
pub mod error;
pub mod glm;
pub mod imputation;
pub mod linalg;
pub mod metrics;
pub mod missingness;
pub mod models;
pub mod pipeline;
pub mod resampling;
pub mod selection;
pub mod stats;
pub mod tabular;

pub use error::{Error, Result};
pub use models::{ModelSpec, Predictor};
pub use tabular::{Cell, ColumnKind, ColumnSpec, DataTable, FeatureKind, FeatureMatrix, Schema};
