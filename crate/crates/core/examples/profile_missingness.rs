//! Missingness profile of the bundled table and Little's MCAR test.

use nephro_xai::ckd;
use nephro_xai::missingness::{little_mcar_test, missing_patterns, profile_missingness};
use nephro_xai::tabular::parse_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let profile = profile_missingness(&table);
    println!("{}", serde_json::to_string_pretty(&profile)?);

    let (_, rows) = table.features_with_missing();
    println!("distinct missingness patterns: {}", missing_patterns(&rows).len());

    for fraction in [0.3, 0.6, 0.8] {
        let r = little_mcar_test(&table, fraction, 42)?;
        println!(
            "fraction {fraction:.1}: chi2 {:.1} on {} df, p = {:.2e}, {} patterns",
            r.statistic, r.degrees_of_freedom, r.p_value, r.n_patterns
        );
    }
    Ok(())
}
