//! Interpretability scorecard from known sets, then from a trained model.

use nephro_xai::ckd;
use nephro_xai::imputation::impute;
use nephro_xai::metrics::{external_fidelity, score_model, MetricsOptions, Scorecard, ScorecardFixture};
use nephro_xai::models::{self, Family, ModelSpec, Predictor};
use nephro_xai::tabular::{encode_for_model, parse_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture: ScorecardFixture = toml::from_str(ckd::REFERENCE_SCORECARD)?;
    println!("{}", fixture.scorecard()?.to_table());

    let f = external_fidelity(&["hemo", "sc", "al"], &["hemo", "al"])?;
    println!("P {:.2} R {:.2} F1 {:.2}\n", f.precision, f.recall, f.f1);

    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let (_, filled) = impute(&table)?;
    let (m, _) = encode_for_model(&filled.table)?;
    let train = m.subset_rows(&(0..m.n_rows()).filter(|i| i % 4 != 0).collect::<Vec<_>>());
    let test = m.subset_rows(&(0..m.n_rows()).filter(|i| i % 4 == 0).collect::<Vec<_>>());
    let model = models::train(&ModelSpec::default_for(Family::Ada, 42), &train)?;
    let correct = test.rows.iter().zip(&test.labels).filter(|(r, &y)| model.predict(r) == y).count();
    let accuracy = correct as f64 / test.n_rows() as f64;
    let report = score_model("AdaBoost", &model, &test, accuracy, &MetricsOptions::default(), 42)?;
    println!("{}", Scorecard { rows: vec![report] }.to_table());
    Ok(())
}
