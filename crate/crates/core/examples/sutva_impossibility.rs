//! No-effect versus own-treatment: the two mixtures produce identical
//! observed-data laws, so every test's errors sum to one.
//!
//! ```text
//! cargo run --release --example sutva_impossibility
//! ```

use std::sync::Arc;

use interference_lab::design::Design;
use interference_lab::impossibility::{mixture_error_sum, mixture_error_sum_exact, tv_profile, sutva_mixtures};
use interference_lab::network::gen_k_regular;
use interference_lab::risk::baseline_tests;

fn main() -> interference_lab::Result<()> {
    let n = 8;
    let pair = sutva_mixtures(n)?;
    for p in [0.5, 0.3] {
        let profile = tv_profile(&pair, &Design::bernoulli(p)?)?;
        println!("Bernoulli({p}): max TV = {}, risk lower bound = {}", profile.max_tv, profile.risk_bound);
    }

    let design = Design::bernoulli(0.5)?;
    let g = Arc::new(gen_k_regular(n, 3, 1)?);
    println!("{:<16} {:>10} {:>16}", "test", "exact", "monte carlo");
    for proc in baseline_tests(&design, g) {
        let exact = mixture_error_sum_exact(&proc, &pair)?;
        let mc = mixture_error_sum(&proc, &pair, 20_000, 7)?;
        println!("{:<16} {:>10.6} {:>9.4} ± {:.4}", proc.label, exact, mc.value, mc.se);
    }
    Ok(())
}
