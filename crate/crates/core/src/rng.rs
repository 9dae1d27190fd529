//! Seed derivation for reproducible, order-independent Monte Carlo.
//!
//! A master seed names a ChaCha8 key; replication `r` reads ChaCha stream `r`
//! of that key. Streams never overlap, so replications can run on any thread
//! in any order and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator type used for every stochastic computation in the crate.
pub type StreamRng = ChaCha8Rng;

/// Independent substream for replication `index` under `master`.
pub fn substream(master: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Derives a child master seed, used where a computation needs a whole
/// family of substreams (e.g. one per row of a curve).
pub fn derive_seed(master: u64, label: u64) -> u64 {
    mix64(master ^ mix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counter-based uniform sign keyed by `(key, unit, exposure)`.
///
/// Used to realise mixture coefficients lazily: the sign for a given
/// `(unit, exposure)` is fixed by the key without materialising the table.
#[inline]
pub fn keyed_sign(key: u64, unit: usize, exposure: u64) -> f64 {
    let h = mix64(mix64(key ^ mix64(unit as u64)) ^ exposure);
    if h >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}
