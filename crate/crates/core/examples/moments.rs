//! Moments of the treated-neighbour fraction and the Riesz weights built
//! from them.
//!
//! ```text
//! cargo run --example moments
//! ```

use interference_lab::lim::{weight_general, weight_half, FractionMoments};

fn main() -> interference_lab::Result<()> {
    for (d, p) in [(2, 0.5), (4, 0.5), (4, 0.3)] {
        let m = FractionMoments::new(d, p)?;
        let o = FractionMoments::enumerated(d, p)?;
        println!("d={d} p={p}: m1..m4 = {:.5} {:.5} {:.5} {:.5} (oracle {:.5} {:.5} {:.5} {:.5})",
            m.m1, m.m2, m.m3, m.m4, o.m1, o.m2, o.m3, o.m4);
        let weights = (0..=d)
            .map(|k| weight_general(k as f64 / d as f64, &m))
            .collect::<interference_lab::Result<Vec<_>>>()?;
        println!("    W(k/d) = {weights:.3?}");
        if p == 0.5 {
            let half = (0..=d).map(|k| weight_half(k as f64 / d as f64, d)).collect::<interference_lab::Result<Vec<_>>>()?;
            println!("    p = 1/2 form: {half:.3?}");
        }
    }
    Ok(())
}
