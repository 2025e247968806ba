//! Trains a compact random forest on the six clinical features and writes it
//! as a model artifact. The HTTP service tests load the result.
//!
//! ```text
//! cargo run --release --example reference_model -- crates/service/fixtures/reference_model.json
//! ```

use nephro_xai::ckd;
use nephro_xai::imputation::impute;
use nephro_xai::models::{self, Hyperparameters, RandomForestParams, ModelArtifact, ModelSpec, Predictor};
use nephro_xai::resampling::{evaluate_cv, smote_balance, stratified_kfold};
use nephro_xai::tabular::{encode_for_model, parse_dataset};

const SEED: u64 = 42;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "reference_model.json".into());
    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let (_, filled) = impute(&table)?;
    let (m, _) = encode_for_model(&filled.table)?;
    let data = m.select(&ckd::FINAL_FEATURES)?;
    let smote = smote_balance(&data, 5, SEED)?;

    let params = RandomForestParams {
        n_estimators: 25,
        ..Default::default()
    };
    let spec = ModelSpec::new(Hyperparameters::Rf(params), SEED);
    let folds = stratified_kfold(&smote.data.labels, 10, SEED)?;
    let cv = evaluate_cv(&spec, &smote.data, &folds)?;
    let model = models::train(&spec, &smote.data)?;
    let artifact = ModelArtifact::new(spec, model, &data, table.schema().fingerprint(), 60, SEED)?
        .with_cv_metrics(cv.metrics);
    artifact.save(&out)?;

    let p = artifact.model.predict_proba(&data.rows[0]);
    println!("cv accuracy {:.3}, row 0 P(ckd) = {:.3}", cv.metrics.accuracy, p[ckd::CKD]);
    println!("wrote {out}");
    Ok(())
}
