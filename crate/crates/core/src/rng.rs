//! Reproducible, splittable random streams.
//!
//! A stream is a `(seed, index)` pair. Children are derived by hashing the
//! parent pair into a fresh 64-bit key and using the child index as the
//! ChaCha stream selector, so two children of the same parent never share
//! keystream and any child can be rebuilt from its coordinates alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

/// Hashes `(seed, index)` to a well-mixed 64-bit key.
pub fn mix64(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub const fn new(seed: u64) -> Self {
        Self { seed, index: 0 }
    }

    /// Deterministic child stream.
    pub fn split(&self, index: u64) -> RngStream {
        let key = splitmix64(self.seed ^ splitmix64(self.index ^ 0xD1B5_4A32_D192_ED03));
        RngStream { seed: key, index }
    }

    /// Convenience for nested splits: `s.path(&[a, b])` is `s.split(a).split(b)`.
    pub fn path(&self, indices: &[u64]) -> RngStream {
        indices.iter().fold(*self, |s, &i| s.split(i))
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}
