//! Filter, wrapper and consensus feature selection on the imputed table.

use nephro_xai::ckd;
use nephro_xai::imputation::impute;
use nephro_xai::selection::{run_selection, SelectionConfig};
use nephro_xai::tabular::{encode_for_model, parse_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_dataset(ckd::DATA_CSV, &ckd::schema())?;
    let (_, filled) = impute(&table)?;
    let (m, _) = encode_for_model(&filled.table)?;
    let sel = run_selection(&m, &SelectionConfig::default())?;

    println!("top information gain:");
    for ig in sel.information_gain.iter().take(6) {
        println!("  {:>6} {:.3}", ig.feature, ig.information_gain);
    }
    for (method, set) in &sel.report.method_sets {
        println!("{method:>12}: {}", set.join(", "));
    }
    println!("consensus ({} votes): {}", sel.report.min_votes, sel.report.consensus.join(", "));
    println!("final: {}", sel.report.final_set.join(", "));
    Ok(())
}
