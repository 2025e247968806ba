//! SMOTE balancing followed by stratified 10-fold evaluation of every family.

use nephro_xai::ckd;
use nephro_xai::imputation::impute;
use nephro_xai::models::{Family, ModelSpec};
use nephro_xai::resampling::{evaluate_cv, smote_balance, stratified_kfold};
use nephro_xai::tabular::{encode_for_model, parse_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let (_, filled) = impute(&table)?;
    let (m, _) = encode_for_model(&filled.table)?;
    let data = m.select(&ckd::FINAL_FEATURES)?;

    let smote = smote_balance(&data, 5, 42)?;
    println!("{} rows after SMOTE ({} synthetic)", smote.data.n_rows(), smote.data.n_rows() - smote.n_original);
    let folds = stratified_kfold(&smote.data.labels, 10, 42)?;

    for family in Family::ALL {
        let report = evaluate_cv(&ModelSpec::default_for(family, 42), &smote.data, &folds)?;
        println!(
            "{:>5}  acc {:.3}  f1 {:.3}  best fold {}",
            report.family, report.metrics.accuracy, report.metrics.f1, report.best_fold
        );
    }
    Ok(())
}
