//! Regenerates `configs/case_study_jscc.json`.
//!
//! cargo run --release -p megsim-core --example fit_case_study_jscc > crates/core/configs/case_study_jscc.json

use megsim::pipeline::case_study_pipeline;
use megsim::simkit::{case_study_calibration_key, fit_jscc};

fn main() -> megsim::Result<()> {
    let (_, merged_dim, cal) = case_study_calibration_key();
    let cfg = fit_jscc(&case_study_pipeline(), merged_dim, &cal)?;
    println!("{}", cfg.to_artifact().to_json()?);
    Ok(())
}
