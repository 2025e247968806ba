//! Stage orchestration behind the command line tool.
//!
//! Each stage writes JSON reports into the output directory. Stages that need
//! a trained model read the artifacts written by `train`; everything else is
//! recomputed from the data, which is deterministic for a fixed seed.

mod config;
pub mod svg;

pub use config::{
    CounterfactualSection, DataConfig, ExplainConfig, McarConfig, MetricsSection, ModelsConfig, OutputConfig,
    PipelineConfig, SelectionSection, SEED_ENV,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::attribution::{self, LimeOptions};
use crate::counterfactual::{self, CemMode, CounterfactualOptions};
use crate::imputation::{self, ImputationPlan, ImputedTable};
use crate::metrics::{self, MetricsOptions, Scorecard, ScorecardFixture};
use crate::models::{self, export_tree, Family, ModelArtifact, ModelSpec, Predictor};
use crate::resampling::{self, SMOTE_LEAKAGE_NOTE};
use crate::selection::{self, FullSelection, SelectionConfig};
use crate::tabular::{self, ColumnKind, DataTable, FeatureMatrix, Schema};
use crate::{ckd, missingness, stats, Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Report documents a full run leaves in the output directory.
pub const REPORT_ARTIFACTS: [&str; 9] = [
    "profile.json",
    "mcar.json",
    "imputation.json",
    "selection.json",
    "evaluation.json",
    "tree.json",
    "explanations.json",
    "counterfactuals.json",
    "scorecard.json",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Profile,
    Mcar,
    Impute,
    Select,
    Train,
    Explain,
    Counterfactual,
    Metrics,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Profile,
        Stage::Mcar,
        Stage::Impute,
        Stage::Select,
        Stage::Train,
        Stage::Explain,
        Stage::Counterfactual,
        Stage::Metrics,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Profile => "profile",
            Stage::Mcar => "mcar",
            Stage::Impute => "impute",
            Stage::Select => "select",
            Stage::Train => "train",
            Stage::Explain => "explain",
            Stage::Counterfactual => "counterfactual",
            Stage::Metrics => "metrics",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Data,
    Stage,
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Option<Stage>,
    pub kind: FailureKind,
    pub error: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Config => 2,
            FailureKind::Data => 3,
            FailureKind::Stage => 4,
        }
    }

    fn config(error: Error) -> Self {
        Self {
            stage: None,
            kind: FailureKind::Config,
            error,
        }
    }
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stage {
            Some(s) => write!(f, "[{s}] {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for StageError {}

fn classify(error: &Error) -> FailureKind {
    match error {
        Error::Config(_) => FailureKind::Config,
        Error::UnknownColumn(_)
        | Error::MissingColumn(_)
        | Error::DuplicateColumn(_)
        | Error::NonNumeric { .. }
        | Error::UnknownCategory { .. }
        | Error::RaggedRow { .. }
        | Error::Schema(_)
        | Error::Csv(_)
        | Error::Unreadable { .. } => FailureKind::Data,
        _ => FailureKind::Stage,
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    report: &'a str,
    schema_version: u32,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at: Option<u64>,
    data: &'a T,
}

/// Per-column summary of the raw table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub kind: ColumnKind,
    pub unit: String,
    pub missing: usize,
    pub missing_percent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric: Option<NumericSummary>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub categories: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

pub fn profile_table(table: &DataTable) -> Vec<ColumnProfile> {
    let schema = table.schema();
    let n = table.n_rows().max(1) as f64;
    schema
        .columns
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let missing = table.rows().iter().filter(|r| r[c].is_missing()).count();
            let mut categories = BTreeMap::new();
            let numeric = match spec.kind {
                ColumnKind::Numeric => {
                    let obs: Vec<f64> = table.numeric_column(c).into_iter().flatten().collect();
                    (!obs.is_empty()).then(|| NumericSummary {
                        min: obs.iter().copied().fold(f64::INFINITY, f64::min),
                        max: obs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        mean: stats::mean(&obs),
                        std: stats::std_dev(&obs),
                    })
                }
                ColumnKind::Nominal => {
                    for r in table.rows() {
                        if let tabular::Cell::Category(k) = r[c] {
                            *categories.entry(spec.categories[k].clone()).or_insert(0) += 1;
                        }
                    }
                    None
                }
            };
            ColumnProfile {
                name: spec.name.clone(),
                kind: spec.kind,
                unit: ckd::unit(&spec.name).to_string(),
                missing,
                missing_percent: 100.0 * missing as f64 / n,
                numeric,
                categories,
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct McarRun {
    sample_fraction: f64,
    result: Outcome<missingness::McarTestResult>,
}

/// A stage sub-result that may fail without failing the stage.
#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Outcome<T> {
    Ok(T),
    Err { error: String },
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Err { error: e.to_string() },
        }
    }
}

const MCAR_INTERPRETATION: &str = "a small p-value rejects the hypothesis that values are missing completely at random";

fn family_file(f: Family) -> String {
    format!("{}.json", f.label().to_ascii_lowercase())
}

/// Runs stages against one configuration; intermediate tables are cached.
pub struct Pipeline {
    cfg: PipelineConfig,
    table: OnceLock<DataTable>,
    imputed: OnceLock<(ImputationPlan, ImputedTable)>,
    matrix: OnceLock<FeatureMatrix>,
    selection: OnceLock<FullSelection>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> std::result::Result<Self, StageError> {
        cfg.validate().map_err(StageError::config)?;
        Ok(Self {
            cfg,
            table: OnceLock::new(),
            imputed: OnceLock::new(),
            matrix: OnceLock::new(),
            selection: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.output.dir
    }

    /// Runs one stage and returns the files it wrote.
    pub fn run(&self, stage: Stage) -> std::result::Result<Vec<PathBuf>, StageError> {
        tracing::info!(%stage, "running stage");
        let res = std::fs::create_dir_all(self.out_dir())
            .map_err(Error::from)
            .and_then(|_| match stage {
                Stage::Profile => self.profile(),
                Stage::Mcar => self.mcar(),
                Stage::Impute => self.impute(),
                Stage::Select => self.select(),
                Stage::Train => self.train(),
                Stage::Explain => self.explain(),
                Stage::Counterfactual => self.counterfactual(),
                Stage::Metrics => self.metrics(),
            });
        res.map_err(|error| StageError {
            stage: Some(stage),
            kind: classify(&error),
            error,
        })
    }

    /// Every stage in order, then a manifest of the written files.
    pub fn run_all(&self) -> std::result::Result<Vec<PathBuf>, StageError> {
        let mut written = Vec::new();
        for stage in Stage::ALL {
            written.extend(self.run(stage)?);
        }
        let names: Vec<String> = written
            .iter()
            .filter_map(|p| p.strip_prefix(self.out_dir()).ok())
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .collect();
        let manifest = self
            .write_report("manifest", "manifest.json", &names)
            .map_err(|error| StageError {
                stage: None,
                kind: FailureKind::Stage,
                error,
            })?;
        written.push(manifest);
        Ok(written)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&p, text)?;
        Ok(p)
    }

    fn write_report<T: Serialize>(&self, report: &str, name: &str, data: &T) -> Result<PathBuf> {
        let generated_at = (!self.cfg.output.canonical)
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        let env = Envelope {
            report,
            schema_version: REPORT_SCHEMA_VERSION,
            seed: self.cfg.seed,
            generated_at,
            data,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn plot(&self, name: &str, svg: String, written: &mut Vec<PathBuf>) -> Result<()> {
        if self.cfg.output.plots {
            written.push(self.write_text(&format!("plots/{name}"), &svg)?);
        }
        Ok(())
    }

    pub fn table(&self) -> Result<&DataTable> {
        if let Some(t) = self.table.get() {
            return Ok(t);
        }
        let unreadable = |p: &Path, e: std::io::Error| Error::Unreadable {
            path: p.display().to_string(),
            reason: e.to_string(),
        };
        let schema = match &self.cfg.data.schema {
            Some(p) => Schema::from_toml_str(&std::fs::read_to_string(p).map_err(|e| unreadable(p, e))?)?,
            None => ckd::schema(),
        };
        let table = match &self.cfg.data.path {
            Some(p) => tabular::parse_reader(std::fs::File::open(p).map_err(|e| unreadable(p, e))?, &schema)?,
            None => tabular::parse_dataset(ckd::DATA_CSV, &schema)?,
        };
        let _ = self.table.set(table);
        Ok(self.table.get().expect("just set"))
    }

    fn imputed(&self) -> Result<&(ImputationPlan, ImputedTable)> {
        if let Some(v) = self.imputed.get() {
            return Ok(v);
        }
        let v = imputation::impute(self.table()?)?;
        let _ = self.imputed.set(v);
        Ok(self.imputed.get().expect("just set"))
    }

    /// Imputed table encoded for the models, every feature.
    pub fn matrix(&self) -> Result<&FeatureMatrix> {
        if let Some(m) = self.matrix.get() {
            return Ok(m);
        }
        let (m, _) = tabular::encode_for_model(&self.imputed()?.1.table)?;
        let _ = self.matrix.set(m);
        Ok(self.matrix.get().expect("just set"))
    }

    fn selection(&self) -> Result<&FullSelection> {
        if let Some(s) = self.selection.get() {
            return Ok(s);
        }
        let cfg = SelectionConfig {
            exclusions: self.cfg.selection.exclusions.clone(),
            seed: self.cfg.seed,
            ..Default::default()
        };
        let s = selection::run_selection(self.matrix()?, &cfg)?;
        let _ = self.selection.set(s);
        Ok(self.selection.get().expect("just set"))
    }

    fn training_features(&self) -> Result<Vec<String>> {
        if self.cfg.selection.use_selected {
            Ok(self.selection()?.report.final_set.clone())
        } else {
            Ok(self.cfg.models.features.clone())
        }
    }

    fn artifact_path(&self, family: Family) -> PathBuf {
        self.path(&format!("models/{}", family_file(family)))
    }

    /// Loads a trained artifact, failing with the ordering hint when absent.
    pub fn load_artifact(&self, family: Family) -> Result<ModelArtifact> {
        let p = self.artifact_path(family);
        if !p.exists() {
            return Err(Error::Precondition(format!(
                "train required first: no {} model at {}",
                family,
                p.display()
            )));
        }
        ModelArtifact::load(p)
    }

    fn profile(&self) -> Result<Vec<PathBuf>> {
        let table = self.table()?;
        #[derive(Serialize)]
        struct Profile {
            n_rows: usize,
            n_features: usize,
            class_counts: BTreeMap<String, usize>,
            columns: Vec<ColumnProfile>,
        }
        let schema = table.schema();
        let target = &schema.columns[schema.target_index()];
        let class_counts = table
            .class_counts()
            .into_iter()
            .enumerate()
            .map(|(k, n)| (target.categories[k].clone(), n))
            .collect();
        let columns = profile_table(table);
        let mut written = vec![self.write_report(
            "profile",
            "profile.json",
            &Profile {
                n_rows: table.n_rows(),
                n_features: schema.feature_indices().len(),
                class_counts,
                columns: columns.clone(),
            },
        )?];
        let bars: Vec<(String, f64)> = columns
            .iter()
            .filter(|c| c.name != schema.target)
            .map(|c| (c.name.clone(), c.missing_percent))
            .collect();
        self.plot("missingness.svg", svg::bar_chart("missing values (%)", &bars), &mut written)?;
        Ok(written)
    }

    fn mcar(&self) -> Result<Vec<PathBuf>> {
        let table = self.table()?;
        let runs: Vec<McarRun> = self
            .cfg
            .mcar
            .sample_fractions
            .iter()
            .map(|&f| McarRun {
                sample_fraction: f,
                result: missingness::little_mcar_test(table, f, self.cfg.seed).into(),
            })
            .collect();
        #[derive(Serialize)]
        struct Mcar {
            missingness: missingness::MissingnessProfile,
            tests: Vec<McarRun>,
            interpretation: &'static str,
        }
        Ok(vec![self.write_report(
            "mcar",
            "mcar.json",
            &Mcar {
                missingness: missingness::profile_missingness(table),
                tests: runs,
                interpretation: MCAR_INTERPRETATION,
            },
        )?])
    }

    fn impute(&self) -> Result<Vec<PathBuf>> {
        let missing_before = self.table()?.missing_count();
        let (plan, imputed) = self.imputed()?;
        #[derive(Serialize)]
        struct Audit<'a> {
            missing_before: usize,
            filled: usize,
            fallback_filled: usize,
            regression_models: usize,
            plan: &'a ImputationPlan,
        }
        Ok(vec![
            self.write_text("imputed.csv", &imputed.table.to_csv())?,
            self.write_text("imputation_mask.csv", &imputed.mask_csv())?,
            self.write_report(
                "imputation",
                "imputation.json",
                &Audit {
                    missing_before,
                    filled: imputed.filled_count(),
                    fallback_filled: imputed.fallback_count(),
                    regression_models: plan.model_count(),
                    plan,
                },
            )?,
        ])
    }

    fn select(&self) -> Result<Vec<PathBuf>> {
        let s = self.selection()?;
        #[derive(Serialize)]
        struct Selection<'a> {
            #[serde(flatten)]
            full: &'a FullSelection,
            training_features: Vec<String>,
        }
        let mut written = vec![self.write_report(
            "selection",
            "selection.json",
            &Selection {
                full: s,
                training_features: self.training_features()?,
            },
        )?];
        let bars: Vec<(String, f64)> = s
            .information_gain
            .iter()
            .map(|g| (g.feature.clone(), g.information_gain))
            .collect();
        self.plot("information_gain.svg", svg::bar_chart("information gain", &bars), &mut written)?;
        Ok(written)
    }

    fn train(&self) -> Result<Vec<PathBuf>> {
        let features = self.training_features()?;
        let data = self.matrix()?.select(&features)?;
        let seed = self.cfg.seed;
        let smote = resampling::smote_balance(&data, self.cfg.models.smote_k, seed)?;
        let folds = resampling::stratified_kfold(&smote.data.labels, self.cfg.models.folds, seed)?;
        let fingerprint = self.table()?.schema().fingerprint();
        let class_names = &data.class_names;

        let mut written = Vec::new();
        let mut reports = Vec::new();
        let mut artifacts: Vec<(Family, ModelArtifact)> = Vec::new();
        for &family in &self.cfg.models.families {
            let spec = ModelSpec::default_for(family, seed);
            let report = resampling::evaluate_cv(&spec, &smote.data, &folds)?;
            let model = models::train(&spec, &smote.data)?;
            let artifact = ModelArtifact::new(
                spec,
                model,
                &data,
                fingerprint.clone(),
                self.cfg.models.background_size,
                seed,
            )?
            .with_cv_metrics(report.metrics);
            let p = self.artifact_path(family);
            std::fs::create_dir_all(p.parent().expect("models dir"))?;
            artifact.save(&p)?;
            written.push(p);
            artifacts.push((family, artifact));
            reports.push(report);
        }

        #[derive(Serialize)]
        struct Evaluation<'a> {
            features: &'a [String],
            n_original: usize,
            n_synthetic: usize,
            folds: usize,
            fold_sizes: Vec<usize>,
            notes: Vec<&'static str>,
            models: &'a [resampling::EvaluationReport],
        }
        written.push(self.write_report(
            "evaluation",
            "evaluation.json",
            &Evaluation {
                features: &features,
                n_original: smote.n_original,
                n_synthetic: smote.data.n_rows() - smote.n_original,
                folds: folds.k,
                fold_sizes: folds.fold_sizes(),
                notes: vec![SMOTE_LEAKAGE_NOTE],
                models: &reports,
            },
        )?);
        if let Some(r) = reports.iter().find(|r| r.family == self.cfg.models.primary.label()) {
            written.push(self.write_text(
                "confusion.txt",
                &r.confusion_text(&class_names[ckd::CKD], &class_names[ckd::NOT_CKD]),
            )?);
        }
        let bars: Vec<(String, f64)> = reports.iter().map(|r| (r.family.clone(), r.metrics.accuracy)).collect();
        self.plot("accuracy.svg", svg::bar_chart("cross-validated accuracy", &bars), &mut written)?;

        #[derive(Serialize)]
        struct Tree {
            family: Option<String>,
            member: Option<usize>,
            tree: Option<models::TreeNode>,
            note: Option<String>,
        }
        let tree_source = artifacts
            .iter()
            .find(|(f, _)| *f == Family::Rf)
            .or_else(|| artifacts.iter().find(|(f, _)| *f == Family::Dt));
        let tree = match tree_source {
            Some((f, a)) => {
                let member = (*f == Family::Rf).then_some(0);
                Tree {
                    family: Some(f.label().to_string()),
                    member,
                    tree: Some(export_tree(&a.model, member, &a.feature_names)?),
                    note: None,
                }
            }
            None => Tree {
                family: None,
                member: None,
                tree: None,
                note: Some("no tree model was trained".into()),
            },
        };
        written.push(self.write_report("tree", "tree.json", &tree)?);
        Ok(written)
    }

    fn primary_artifact(&self) -> Result<ModelArtifact> {
        match &self.cfg.models.artifact {
            Some(p) if !p.exists() => Err(Error::Precondition(format!(
                "train required first: no model at {}",
                p.display()
            ))),
            Some(p) => ModelArtifact::load(p),
            None => self.load_artifact(self.cfg.models.primary),
        }
    }

    /// Encoded data restricted to the artifact's features.
    fn artifact_data(&self, artifact: &ModelArtifact) -> Result<FeatureMatrix> {
        self.matrix()?.select(&artifact.feature_names)
    }

    fn explained_row(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        let r = self.cfg.explain.row;
        data.rows.get(r).cloned().ok_or_else(|| {
            Error::invalid(format!("row {r} is out of range for {} rows", data.n_rows()))
        })
    }

    fn explain(&self) -> Result<Vec<PathBuf>> {
        let artifact = self.primary_artifact()?;
        let data = self.artifact_data(&artifact)?;
        let row = self.explained_row(&data)?;
        let model = &artifact.model;
        let seed = self.cfg.seed;
        let ex = &self.cfg.explain;
        let bg_matrix = artifact.background_matrix();
        let class = ckd::CKD;

        let lime = attribution::lime_explain(
            model,
            &row,
            &bg_matrix,
            class,
            &LimeOptions {
                n_samples: ex.lime_samples,
                ..Default::default()
            },
            seed,
        )?;
        let shapley = if row.len() <= 10 {
            attribution::shapley_exact(model, &row, &artifact.background, class)?
        } else {
            attribution::shapley_sampled(model, &row, &artifact.background, ex.permutations, seed, class)?
        };
        let cf_opts = CounterfactualOptions {
            budget: self.cfg.counterfactual.budget,
            immutables: self.cfg.counterfactual.immutables.clone(),
            ..Default::default()
        };
        let pn = counterfactual::cem_explain(model, &row, CemMode::PertinentNegative, &data, &cf_opts, seed);
        let pp = counterfactual::cem_explain(model, &row, CemMode::PertinentPositive, &bg_matrix, &cf_opts, seed);

        let n_global = ex.global_rows.min(data.n_rows()).max(1);
        let stride = (data.n_rows() / n_global).max(1);
        let global_rows: Vec<Vec<f64>> = data.rows.iter().step_by(stride).take(n_global).cloned().collect();
        let global_bg: Vec<Vec<f64>> = artifact.background.iter().take(50).cloned().collect();
        let global = attribution::global_shapley(
            model,
            &global_rows,
            &global_bg,
            &artifact.feature_names,
            class,
            ex.permutations,
            seed,
        )?;
        let effect_idx: Vec<usize> = ex
            .effect_features
            .iter()
            .map(|f| data.feature_index(f).ok_or_else(|| Error::UnknownFeature(f.clone())))
            .collect::<Result<_>>()?;
        let mut pdp = Vec::new();
        let mut ale = Vec::new();
        for &j in &effect_idx {
            if data.kinds[j].is_nominal() {
                continue;
            }
            pdp.push(attribution::pdp(model, &data, &[j], ex.grid_size, class)?);
            ale.push(attribution::ale(model, &data, j, ex.ale_bins, class)?);
        }
        let numeric_pair: Vec<usize> = effect_idx.iter().copied().filter(|&j| !data.kinds[j].is_nominal()).collect();
        if numeric_pair.len() >= 2 {
            pdp.push(attribution::pdp(model, &data, &numeric_pair[..2], ex.grid_size.min(10), class)?);
        }
        let dependence = match effect_idx.as_slice() {
            [a, b, ..] => Some(attribution::dependence_triples(&global_rows, &global.rows, *a, *b)),
            _ => None,
        };

        #[derive(Serialize)]
        struct Explanations<'a> {
            model: &'a str,
            row_index: usize,
            record: BTreeMap<&'a str, f64>,
            explained_class: &'a str,
            lime: &'a attribution::LocalExplanation,
            shapley: &'a attribution::ShapleyAttribution,
            pertinent_negative: Outcome<counterfactual::CemResult>,
            pertinent_positive: Outcome<counterfactual::CemResult>,
            global_mean_abs_phi: BTreeMap<&'a str, f64>,
            global_ranking: Vec<&'a str>,
            dependence: Option<Vec<attribution::DependencePoint>>,
            pdp: &'a [attribution::GridFunction],
            ale: &'a [attribution::GridFunction],
        }
        let names = &artifact.feature_names;
        let doc = Explanations {
            model: artifact.spec.family().label(),
            row_index: ex.row,
            record: names.iter().map(String::as_str).zip(row.iter().copied()).collect(),
            explained_class: &artifact.class_names[class],
            lime: &lime,
            shapley: &shapley,
            pertinent_negative: pn.into(),
            pertinent_positive: pp.into(),
            global_mean_abs_phi: names.iter().map(String::as_str).zip(global.mean_abs_phi.iter().copied()).collect(),
            global_ranking: global.ranking().into_iter().map(|j| names[j].as_str()).collect(),
            dependence,
            pdp: &pdp,
            ale: &ale,
        };
        let mut written = vec![self.write_report("explanations", "explanations.json", &doc)?];

        let lime_bars: Vec<(String, f64)> = lime.ranked().iter().map(|e| (e.condition.clone(), e.weight)).collect();
        self.plot("lime.svg", svg::bar_chart("local surrogate weights", &lime_bars), &mut written)?;
        let shap_bars: Vec<(String, f64)> = names.iter().cloned().zip(shapley.phi.iter().copied()).collect();
        self.plot("shapley.svg", svg::bar_chart("Shapley values", &shap_bars), &mut written)?;
        let global_bars: Vec<(String, f64)> = global
            .ranking()
            .into_iter()
            .map(|j| (names[j].clone(), global.mean_abs_phi[j]))
            .collect();
        self.plot("global_shapley.svg", svg::bar_chart("mean |Shapley value|", &global_bars), &mut written)?;
        for g in pdp.iter().chain(&ale).filter(|g| g.grid.len() == 1) {
            let kind = if g.kind == attribution::GridKind::Ale { "ale" } else { "pdp" };
            let pts: Vec<(f64, f64)> = g.grid[0].iter().copied().zip(g.values.iter().copied()).collect();
            let x_label = format!("{} ({})", g.features[0], g.units[0]);
            self.plot(
                &format!("{kind}_{}.svg", g.features[0]),
                svg::line_chart(&format!("{kind} {}", g.features[0]), &x_label, "P(ckd)", &pts),
                &mut written,
            )?;
        }
        Ok(written)
    }

    fn counterfactual(&self) -> Result<Vec<PathBuf>> {
        let artifact = self.primary_artifact()?;
        let data = self.artifact_data(&artifact)?;
        let row = self.explained_row(&data)?;
        let model = &artifact.model;
        let target = 1 - model.predict(&row);
        let opts = CounterfactualOptions {
            k: self.cfg.counterfactual.k,
            budget: self.cfg.counterfactual.budget,
            immutables: self.cfg.counterfactual.immutables.clone(),
            ..Default::default()
        };
        let set = counterfactual::counterfactual_search(model, &row, target, &data, &opts, self.cfg.seed)?;
        #[derive(Serialize)]
        struct Doc<'a> {
            row_index: usize,
            immutables: &'a [String],
            #[serde(flatten)]
            set: &'a counterfactual::CounterfactualSet,
        }
        Ok(vec![
            self.write_report(
                "counterfactuals",
                "counterfactuals.json",
                &Doc {
                    row_index: self.cfg.explain.row,
                    immutables: &opts.immutables,
                    set: &set,
                },
            )?,
            self.write_text("counterfactuals.txt", &set.to_table(&artifact.class_names))?,
        ])
    }

    fn metrics(&self) -> Result<Vec<PathBuf>> {
        let m = &self.cfg.metrics;
        let card = match &m.fixture {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                let fixture: ScorecardFixture = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                fixture.scorecard()?
            }
            None => {
                let opts = MetricsOptions {
                    cutoff: m.cutoff,
                    d_total: m.d_total,
                    explainer: m.explainer,
                    ..Default::default()
                };
                let mut rows = Vec::new();
                for &family in &m.models {
                    let a = self.load_artifact(family)?;
                    let data = self.artifact_data(&a)?;
                    let accuracy = a.cv_metrics.map_or(f64::NAN, |c| c.accuracy);
                    rows.push(metrics::score_model(
                        family.label(),
                        &a.model,
                        &data,
                        accuracy,
                        &opts,
                        self.cfg.seed,
                    )?);
                }
                Scorecard { rows }
            }
        };
        Ok(vec![
            self.write_report("scorecard", "scorecard.json", &card)?,
            self.write_text("scorecard.txt", &card.to_table())?,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path) -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.output.dir = dir.to_path_buf();
        c.output.canonical = true;
        c
    }

    #[test]
    fn explain_before_train_is_a_stage_failure() {
        let dir = tempfile::tempdir().unwrap();
        let p = Pipeline::new(cfg(dir.path())).unwrap();
        let e = p.run(Stage::Explain).unwrap_err();
        assert_eq!(e.exit_code(), 4);
        assert!(e.to_string().contains("train required first"), "{e}");
    }

    #[test]
    fn bad_config_and_bad_data_map_to_their_codes() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path());
        c.models.folds = 1;
        assert_eq!(Pipeline::new(c).err().unwrap().exit_code(), 2);

        let csv = dir.path().join("bad.csv");
        std::fs::write(&csv, "age,bp\n1,2\n").unwrap();
        let mut c = cfg(dir.path());
        c.data.path = Some(csv);
        assert_eq!(Pipeline::new(c).unwrap().run(Stage::Profile).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn fixture_scorecard_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let fx = dir.path().join("fx.toml");
        std::fs::write(&fx, ckd::REFERENCE_SCORECARD).unwrap();
        let mut c = cfg(dir.path());
        c.metrics.fixture = Some(fx);
        let out = Pipeline::new(c).unwrap().run(Stage::Metrics).unwrap();
        assert_eq!(out.len(), 2);
        let text = std::fs::read_to_string(&out[1]).unwrap();
        assert!(text.contains("AdaBoost"));
    }
}
