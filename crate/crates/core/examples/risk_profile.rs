//! Exact worst-case errors of the linear-in-means test on a small network,
//! next to a coin flip.
//!
//! ```text
//! cargo run --release --example risk_profile
//! ```

use std::sync::Arc;

use interference_lab::design::Design;
use interference_lab::lim::ThresholdVariant;
use interference_lab::network::gen_k_regular;
use interference_lab::risk::{
    default_alt_models, default_null_models, lim_procedure, risk_profile, CoinFlip, Evaluation, TestProcedure,
};
use interference_lab::SeparationFunctional;

fn main() -> interference_lab::Result<()> {
    let g = Arc::new(gen_k_regular(14, 4, 8)?);
    let nulls = default_null_models(&g, 1)?;
    let delta = 1.0;
    let alts = default_alt_models(&g, delta, 2)?;
    let procs = [
        lim_procedure(g.clone(), 0.5, ThresholdVariant::Main)?,
        TestProcedure::new(Design::bernoulli(0.5)?, CoinFlip { q: 0.05 }, "coin-flip:0.05"),
    ];
    for proc in &procs {
        let r = risk_profile(proc, &nulls, &alts, delta, SeparationFunctional::LinearInMeans, Evaluation::Exact)?;
        println!(
            "{:<18} type I {:.4} (null #{}), type II {:.4} (alt #{}), overall {:.4}",
            proc.label, r.type1.value, r.worst_null, r.type2.value, r.worst_alt, r.overall
        );
    }
    Ok(())
}
