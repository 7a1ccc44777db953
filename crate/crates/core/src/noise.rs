//! Counter-based Gaussian noise.
//!
//! Every draw is addressed by a tuple `(seed, stream, a, b)`. The tuple is
//! packed into a 256-bit ChaCha8 key and the first standard-normal sample of
//! that generator is returned, so a value never depends on which other values
//! were realized before it or on which thread asked for it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream identifiers. Distinct streams never share a key.
pub mod stream {
    pub const WHITE_NOISE_L: u64 = 0;
    pub const WHITE_NOISE_S: u64 = 1;
    pub const WHITE_NOISE_E: u64 = 2;
    pub const REGRESSION_DATA: u64 = 10;
    pub const SPLIT_Z1: u64 = 11;
    pub const SPLIT_Z2: u64 = 12;
    pub const ALGORITHM_Z3: u64 = 13;
    pub const REPLICATION_SEED: u64 = 20;
    pub const SUB_SEED: u64 = 21;
}

#[inline]
fn keyed_rng(seed: u64, stream: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Standard normal draw addressed by `(seed, stream, a, b)`.
#[inline]
pub fn keyed_normal(seed: u64, stream: u64, a: u64, b: u64) -> f64 {
    StandardNormal.sample(&mut keyed_rng(seed, stream, a, b))
}

/// `len` standard normals, element `i` keyed on `(seed, stream, i)`.
pub fn normal_vector(seed: u64, stream: u64, len: usize) -> Vec<f64> {
    (0..len as u64)
        .map(|i| keyed_normal(seed, stream, i, 0))
        .collect()
}

/// Mixes a base seed with a counter into an independent 64-bit seed.
pub fn derive_seed(base: u64, stream: u64, counter: u64) -> u64 {
    keyed_rng(base, stream, counter, 0).next_u64()
}
