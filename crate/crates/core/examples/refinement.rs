//! Refinement checks between exposure mappings, with witnesses when they fail.
//!
//! ```text
//! cargo run --example refinement
//! ```

use std::sync::Arc;

use interference_lab::network::gen_k_regular;
use interference_lab::{check_refinement, ExposureSpec};

fn main() -> interference_lab::Result<()> {
    let g = Arc::new(gen_k_regular(10, 3, 42)?);
    let own = ExposureSpec::own_treatment(10);
    let strat = ExposureSpec::stratified(g.clone());
    let arb = ExposureSpec::arbitrary_neighborhood(g)?;

    for (name, coarse, fine) in [
        ("own-treatment -> stratified", &own, &strat),
        ("stratified -> arbitrary", &strat, &arb),
        ("stratified -> own-treatment", &strat, &own),
    ] {
        let r = check_refinement(coarse, fine)?;
        if r.is_refinement {
            println!("{name}: refinement, S_avg = {:.3}, largest separation = {:.3}", r.s_avg, r.max_separation());
            println!("    unit 0 split sets: {:?}", r.split_sets[0]);
        } else {
            let w = r.witness.as_ref().expect("failed checks carry a witness");
            println!("{name}: not a refinement; unit {} separates z={} and z'={}", w.unit, w.z, w.z_prime);
        }
    }
    Ok(())
}
