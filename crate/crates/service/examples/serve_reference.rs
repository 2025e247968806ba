//! Serves the bundled reference model on 127.0.0.1:8080.
//!
//! ```text
//! curl -s localhost:8080/predict -H 'content-type: application/json' \
//!   -d '{"record":{"hemo":9.1,"sc":3.2,"al":3,"htn":1,"dm":1,"age":61}}'
//! ```

use nephro_xai_service::{serve, AppState, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_model.json");
    let state = AppState::load(path, ServiceConfig::default())?;
    serve("127.0.0.1:8080".parse()?, state).await?;
    Ok(())
}
