//! Counter-based expansion of a single run seed into independent streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `counter` of `base`.
pub fn derive_seed(base: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(base) ^ splitmix64(counter.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

pub fn rng_for(base: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, counter))
}
