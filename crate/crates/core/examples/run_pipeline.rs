//! Every stage end to end into a temporary directory.

use nephro_xai::models::Family;
use nephro_xai::pipeline::{Pipeline, PipelineConfig, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("nephro-xai-run"));
    let mut cfg = PipelineConfig::default();
    cfg.output.dir = dir;
    cfg.output.canonical = true;
    cfg.models.families = vec![Family::Lr, Family::Rf, Family::Ada, Family::Gbm];
    let pipeline = Pipeline::new(cfg)?;
    for stage in Stage::ALL {
        let files = pipeline.run(stage)?;
        println!("{:<15} {} files", stage.name(), files.len());
    }
    println!("outputs in {}", pipeline.out_dir().display());
    Ok(())
}
