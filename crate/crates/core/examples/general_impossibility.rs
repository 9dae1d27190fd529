//! The mixture construction for an arbitrary nested pair: own-treatment
//! against stratified interference on a random 3-regular graph.
//!
//! ```text
//! cargo run --release --example general_impossibility
//! ```

use std::sync::Arc;

use interference_lab::design::Design;
use interference_lab::impossibility::{general_mixtures, tv_profile, Mixture, SignPattern};
use interference_lab::network::gen_k_regular;
use interference_lab::separation::refinement_separation_coeff;
use interference_lab::rng::substream;
use interference_lab::{check_refinement, ExposureSpec};

fn main() -> interference_lab::Result<()> {
    let g = Arc::new(gen_k_regular(10, 3, 5)?);
    let coarse = ExposureSpec::own_treatment(10);
    let fine = ExposureSpec::stratified(g);
    let report = check_refinement(&coarse, &fine)?;
    println!("S_avg = {}, largest separation 4·S_avg = {}", report.s_avg, report.max_separation());

    let pair = general_mixtures(coarse, fine, report.clone(), SignPattern::FirstPositive)?;
    let alt = pair.draw(Mixture::Alt, &mut substream(9, 0));
    let sep = refinement_separation_coeff(&alt, &report)?;
    println!("every alternative draw sits at the top: g = {} of {}", sep.g, sep.max_g);

    for p in [0.5, 0.2] {
        let profile = tv_profile(&pair, &Design::bernoulli(p)?)?;
        println!("Bernoulli({p}): max TV = {}, risk lower bound = {}", profile.max_tv, profile.risk_bound);
    }

    // Pinning one alternative outcome breaks indistinguishability.
    let broken = pair.with_forced_alt(0, 1.0)?;
    let profile = tv_profile(&broken, &Design::bernoulli(0.5)?)?;
    println!("perturbed pair: max TV = {}, bound = {}", profile.max_tv, profile.risk_bound);
    Ok(())
}
