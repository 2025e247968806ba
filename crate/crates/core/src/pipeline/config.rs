use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ckd;
use crate::metrics::ValidationExplainer;
use crate::models::Family;
use crate::{Error, Result};

pub const SEED_ENV: &str = "NEPHRO_XAI_SEED";

/// Pipeline configuration. Every field has a default, so an empty file is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub output: OutputConfig,
    pub mcar: McarConfig,
    pub selection: SelectionSection,
    pub models: ModelsConfig,
    pub explain: ExplainConfig,
    pub counterfactual: CounterfactualSection,
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file; the bundled table is used when unset.
    pub path: Option<PathBuf>,
    /// Schema TOML; the bundled schema is used when unset.
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Omit timestamps so reruns are byte-identical.
    pub canonical: bool,
    /// Also write SVG charts.
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            canonical: false,
            plots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McarConfig {
    pub sample_fractions: Vec<f64>,
}

impl Default for McarConfig {
    fn default() -> Self {
        Self {
            sample_fractions: vec![0.3, 0.6, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub exclusions: Vec<String>,
    /// Train on the consensus output instead of `models.features`.
    pub use_selected: bool,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            exclusions: ckd::DEFAULT_EXCLUSIONS.iter().map(|s| s.to_string()).collect(),
            use_selected: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub families: Vec<Family>,
    /// Model used by `explain` and `counterfactual`.
    pub primary: Family,
    pub features: Vec<String>,
    pub folds: usize,
    pub smote_k: usize,
    pub background_size: usize,
    /// Artifact read by `explain` and `counterfactual` instead of the primary model.
    pub artifact: Option<PathBuf>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self {
            families: vec![
                Family::Lr,
                Family::Nb,
                Family::Lsvm,
                Family::Ada,
                Family::Gbm,
                Family::Dt,
                Family::Rf,
            ],
            primary: Family::Rf,
            features: ckd::FINAL_FEATURES.iter().map(|s| s.to_string()).collect(),
            folds: crate::resampling::DEFAULT_FOLDS,
            smote_k: crate::resampling::DEFAULT_K_NEIGHBORS,
            background_size: 100,
            artifact: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub row: usize,
    pub lime_samples: usize,
    pub permutations: usize,
    /// Rows explained for the global Shapley ranking.
    pub global_rows: usize,
    pub effect_features: Vec<String>,
    pub grid_size: usize,
    pub ale_bins: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            row: 0,
            lime_samples: 5000,
            permutations: 512,
            global_rows: 100,
            effect_features: vec!["hemo".into(), "sc".into()],
            grid_size: crate::attribution::DEFAULT_GRID_SIZE,
            ale_bins: crate::attribution::DEFAULT_ALE_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualSection {
    pub k: usize,
    pub budget: usize,
    pub immutables: Vec<String>,
}

impl Default for CounterfactualSection {
    fn default() -> Self {
        Self {
            k: crate::counterfactual::DEFAULT_K,
            budget: crate::counterfactual::DEFAULT_BUDGET,
            immutables: ckd::DEFAULT_IMMUTABLES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub models: Vec<Family>,
    pub cutoff: f64,
    pub d_total: usize,
    pub explainer: ValidationExplainer,
    /// Score fixed sets from this TOML file instead of trained models.
    pub fixture: Option<PathBuf>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            models: vec![Family::Ada, Family::Rf, Family::Gbm],
            cutoff: crate::metrics::DEFAULT_CUTOFF,
            d_total: crate::metrics::DEFAULT_D_TOTAL,
            explainer: ValidationExplainer::Lime,
            fixture: None,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            data: DataConfig::default(),
            output: OutputConfig::default(),
            mcar: McarConfig::default(),
            selection: SelectionSection::default(),
            models: ModelsConfig::default(),
            explain: ExplainConfig::default(),
            counterfactual: CounterfactualSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and applies the seed environment override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.apply_env()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{v}`")))?;
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.folds < 2 {
            return Err(Error::Config("models.folds must be at least 2".into()));
        }
        if self.models.features.is_empty() {
            return Err(Error::Config("models.features is empty".into()));
        }
        if self.models.smote_k == 0 {
            return Err(Error::Config("models.smote_k must be positive".into()));
        }
        if self.mcar.sample_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::Config("mcar.sample_fractions must lie in (0, 1]".into()));
        }
        if !(self.metrics.cutoff > 0.0 && self.metrics.cutoff <= 1.0) {
            return Err(Error::Config("metrics.cutoff must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), PipelineConfig::default());
        let round = PipelineConfig::from_toml_str(&PipelineConfig::default().to_toml_string()).unwrap();
        assert_eq!(round, PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            PipelineConfig::from_toml_str("[models]\nfoldz = 3\n"),
            Err(Error::Config(_))
        ));
        let c = PipelineConfig::from_toml_str("seed = 7\n[models]\nfamilies = [\"rf\", \"lr\"]\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.models.families, vec![Family::Rf, Family::Lr]);
    }
}
