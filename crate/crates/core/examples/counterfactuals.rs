//! Counterfactuals and contrastive (pertinent negative / positive) explanations.

use nephro_xai::ckd;
use nephro_xai::counterfactual::{cem_explain, counterfactual_search, CemMode, CounterfactualOptions};
use nephro_xai::imputation::impute;
use nephro_xai::models::{self, Family, ModelSpec};
use nephro_xai::tabular::{encode_for_model, parse_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let (_, filled) = impute(&table)?;
    let (m, _) = encode_for_model(&filled.table)?;
    let data = m.select(&ckd::FINAL_FEATURES)?;
    let model = models::train(&ModelSpec::default_for(Family::Rf, 42), &data)?;

    let opts = CounterfactualOptions::default();
    let row = &data.rows[0];
    let set = counterfactual_search(&model, row, ckd::NOT_CKD, &data, &opts, 11)?;
    println!("{} valid of {} candidates", set.valid_found, set.evaluated);
    println!("{}", set.to_table(&data.class_names));

    for mode in [CemMode::PertinentNegative, CemMode::PertinentPositive] {
        match cem_explain(&model, row, mode, &data, &opts, 11) {
            Ok(r) => println!("{mode:?}: sparsity {}, class {} -> {}", r.sparsity, r.original_class, r.achieved_class),
            Err(e) => println!("{mode:?}: {e}"),
        }
    }
    Ok(())
}
