//! Seeded random streams.
//!
//! Every stochastic routine draws from a ChaCha stream addressed by
//! `(seed, domain, index)`. Replicate `i` always sees the same numbers no
//! matter which thread runs it or in what order, so outputs are identical
//! across thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep different consumers of one user seed apart.
pub mod domain {
    pub const BOOTSTRAP: u64 = 0x6f6f_7473_7472_6170;
    pub const DIP_NULL: u64 = 0x6469_705f_6e75_6c6c;
    pub const SIMULATION: u64 = 0x7369_6d75_6c61_7465;
}

/// SplitMix64 finalizer, used to spread `(seed, domain)` over the key space.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(domain)));
    rng.set_stream(index);
    rng
}
