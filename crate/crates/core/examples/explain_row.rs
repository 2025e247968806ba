//! Local explanations for one patient: LIME weights and Shapley values.

use nephro_xai::attribution::{lime_explain, LimeOptions};
use nephro_xai::attribution::{shapley_exact, shapley_sampled};
use nephro_xai::ckd;
use nephro_xai::imputation::impute;
use nephro_xai::models::{self, Family, ModelSpec, Predictor};
use nephro_xai::tabular::{encode_for_model, parse_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let (_, filled) = impute(&table)?;
    let (m, _) = encode_for_model(&filled.table)?;
    let data = m.select(&ckd::FINAL_FEATURES)?;
    let model = models::train(&ModelSpec::default_for(Family::Rf, 42), &data)?;

    let row = &data.rows[0];
    let p = model.predict_proba(row);
    println!("P(ckd) = {:.3}", p[ckd::CKD]);

    let lime = lime_explain(&model, row, &data, ckd::CKD, &LimeOptions::default(), 7)?;
    println!("LIME (kernel width {:.2}):", lime.kernel_width);
    for e in lime.ranked() {
        println!("  {:<24} {:+.3}", e.condition, e.weight);
    }

    let background: Vec<Vec<f64>> = data.rows.iter().step_by(8).cloned().collect();
    let exact = shapley_exact(&model, row, &background, ckd::CKD)?;
    let sampled = shapley_sampled(&model, row, &background, 512, 7, ckd::CKD)?;
    println!("Shapley (exact vs 512 permutations), base {:.3}:", exact.base_value);
    for (j, name) in data.names.iter().enumerate() {
        println!("  {:>5} {:+.3} {:+.3}", name, exact.phi[j], sampled.phi[j]);
    }
    println!("efficiency gap {:.2e}", exact.efficiency_gap());
    Ok(())
}
