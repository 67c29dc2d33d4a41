//! Deterministic random substreams keyed by (replicate, cell, status).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Cell index used for draws that span all cells at once (multinomial, urn).
pub const JOINT_CELL: u64 = u64::MAX;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A root seed from which independent generators are derived. The same
/// `(seed, replicate, cell, status)` always yields the same generator, so
/// results do not depend on evaluation order or thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, replicate: u64, cell: u64, status: u64) -> ChaCha8Rng {
        let mut h = splitmix64(self.seed);
        for part in [replicate, cell, status] {
            h = splitmix64(h ^ part);
        }
        let mut key = [0u8; 32];
        let mut s = h;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// A child stream for nested experiments, e.g. one per simulated fit.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream {
            seed: splitmix64(splitmix64(self.seed) ^ index.rotate_left(17)),
        }
    }
}
