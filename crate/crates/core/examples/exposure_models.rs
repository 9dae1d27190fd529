//! Exposure mappings on a small network and the outcomes they induce.
//!
//! ```text
//! cargo run --example exposure_models
//! ```

use std::sync::Arc;

use interference_lab::{ExposureOutcomeModel, ExposureSpec, Intervention, Network};

fn main() -> interference_lab::Result<()> {
    let g = Arc::new(Network::cycle(6)?);
    let specs = [
        ExposureSpec::no_effect(6),
        ExposureSpec::own_treatment(6),
        ExposureSpec::stratified(g.clone()),
        ExposureSpec::arbitrary_neighborhood(g.clone())?,
    ];
    let z = Intervention::from_u8(&[1, 0, 0, 1, 1, 0])?;
    println!("z = {z}");
    for spec in &specs {
        let sizes: Vec<u64> = (0..6).map(|i| spec.exposure_count(i)).collect();
        println!("{:<24} |E_i| = {:?}  exposures = {:?}", spec.kind().name(), sizes, spec.exposures(&z));
    }

    // Outcome grows with the number of treated neighbours (stratified exposure 2t + z_i).
    let model = ExposureOutcomeModel::from_fn(specs[2].clone(), |_, e| {
        let (t, own) = ((e / 2) as f64, (e % 2) as f64);
        (-0.6 + 0.2 * own + 0.3 * t).clamp(-1.0, 1.0)
    })?;
    println!("y(z) = {:.2?}", model.evaluate(&z));
    Ok(())
}
