//! Deterministic seed derivation and noise sampling.
//!
//! Every randomized routine in this crate takes an explicit `u64` seed and
//! derives sub-seeds through [`derive_seed`]. The mixer is written out here
//! rather than borrowed from `std` hashers so that outputs stay stable
//! across toolchain upgrades.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the tag bytes, then splitmix64 finalization over the
/// accumulated state. Stable by construction.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ h.rotate_left(17) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The RNG used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One draw from Laplace(0, scale) via the inverse CDF.
pub fn sample_laplace<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    // u in (-0.5, 0.5]; the open lower end keeps ln() finite.
    let u: f64 = rng.random::<f64>() - 0.5;
    let u = if u == -0.5 { -0.5 + f64::EPSILON } else { u };
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}
