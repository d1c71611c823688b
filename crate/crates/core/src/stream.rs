//! Deterministic random streams.
//!
//! A [`Stream`] is a 64-bit key. Child streams are derived from a parent key
//! and a purpose index, so the noise used at (run, iteration, pair, side) is a
//! pure function of the master seed and that path. Two runs with the same
//! master seed replay bit-identically, and sibling paths never share draws.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator handed to every stochastic operation.
pub type StreamRng = Xoshiro256PlusPlus;

/// Purpose labels used when deriving child streams.
pub mod purpose {
    pub const PERTURBATION: u64 = 0x5045_5254;
    pub const PLUS: u64 = 0x504c_5553;
    pub const MINUS: u64 = 0x4d49_4e53;
    pub const SPHERE: u64 = 0x5350_4852;
    pub const PLAY: u64 = 0x504c_4159;
    pub const START: u64 = 0x5354_5254;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed ^ 0x6e61_7368_7365_656b),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Derive the child stream labelled `index`.
    #[inline]
    pub fn child(self, index: u64) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }

    /// Derive along a path of labels.
    pub fn path(self, labels: &[u64]) -> Self {
        labels.iter().fold(self, |s, &l| s.child(l))
    }

    #[inline]
    pub fn rng(self) -> StreamRng {
        StreamRng::seed_from_u64(self.key)
    }
}
