//! Random-number contract.
//!
//! Every stream is a [`ChaCha8Rng`] seeded from a 64-bit value. Independent
//! runs derive their seed as `stream_seed(master, index)`, a SplitMix64-style
//! mix of the two words, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream of `master`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Fills `out` with independent standard normal draws.
pub fn fill_gaussian(rng: &mut SimRng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub fn gaussian_increments(rng: &mut SimRng, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_gaussian(rng, &mut v);
    v
}
