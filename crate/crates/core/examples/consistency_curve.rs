//! Error of the linear-in-means test as the network grows.
//!
//! ```text
//! cargo run --release --example consistency_curve
//! ```

use interference_lab::lim::ThresholdVariant;
use interference_lab::risk::{consistency_curve, default_alt_models, CurveConfig, GraphFamily};

fn main() -> interference_lab::Result<()> {
    let cfg = CurveConfig {
        family: GraphFamily::KRegular { k: 4 },
        ns: vec![1_000, 5_000, 20_000],
        delta: 1.0,
        p: 0.5,
        variant: ThresholdVariant::Main,
        reps: 200,
        seed: 2024,
    };
    println!("{:>7} {:>8} {:>8} {:>8}", "n", "type1", "type2", "overall");
    for row in consistency_curve(&cfg, &default_alt_models)? {
        println!("{:>7} {:>8.3} {:>8.3} {:>8.3}", row.n, row.type1, row.type2, row.overall);
    }
    Ok(())
}
