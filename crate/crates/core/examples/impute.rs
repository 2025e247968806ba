//! Pattern-wise regression imputation of the bundled table.

use nephro_xai::ckd;
use nephro_xai::imputation::impute;
use nephro_xai::tabular::parse_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let (plan, filled) = impute(&table)?;
    println!(
        "{} complete rows, {} fitted models ({} fallbacks)",
        plan.complete_rows,
        plan.model_count(),
        plan.fallback_model_count()
    );
    for f in plan.features.iter().filter(|f| f.missing_fraction > 0.0).take(8) {
        println!("{:>6}  {:5.1}% missing, {} patterns", f.feature, 100.0 * f.missing_fraction, f.patterns.len());
    }
    println!("missing after imputation: {}", filled.table.missing_count());
    Ok(())
}
