//! Global Shapley ranking, partial dependence and accumulated local effects.

use nephro_xai::attribution::{ale, pdp};
use nephro_xai::attribution::{dependence_triples, global_shapley};
use nephro_xai::ckd;
use nephro_xai::imputation::impute;
use nephro_xai::models::{self, Family, ModelSpec};
use nephro_xai::tabular::{encode_for_model, parse_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let (_, filled) = impute(&table)?;
    let (m, _) = encode_for_model(&filled.table)?;
    let data = m.select(&ckd::FINAL_FEATURES)?;
    let model = models::train(&ModelSpec::default_for(Family::Gbm, 42), &data)?;

    let rows: Vec<Vec<f64>> = data.rows.iter().step_by(5).cloned().collect();
    let background: Vec<Vec<f64>> = data.rows.iter().step_by(10).cloned().collect();
    let global = global_shapley(&model, &rows, &background, &data.names, ckd::CKD, 256, 3)?;
    println!("mean |phi|:");
    for j in global.ranking() {
        println!("  {:>5} {:.3}", data.names[j], global.mean_abs_phi[j]);
    }

    let hemo = data.feature_index("hemo").expect("hemo");
    let sc = data.feature_index("sc").expect("sc");
    let pd = pdp(&model, &data, &[hemo], 10, ckd::CKD)?;
    let al = ale(&model, &data, hemo, 8, ckd::CKD)?;
    println!("hemo ({}):", pd.units[0]);
    for (x, y) in pd.grid[0].iter().zip(&pd.values) {
        println!("  pdp {x:6.2} -> {y:.3}");
    }
    for (x, y) in al.grid[0].iter().zip(&al.values) {
        println!("  ale {x:6.2} -> {y:+.3}");
    }
    let pairs = dependence_triples(&rows, &global.rows, hemo, sc);
    println!("{} dependence points for hemo coloured by sc", pairs.len());
    Ok(())
}
