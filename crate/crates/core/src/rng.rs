//! Keyed random streams.
//!
//! Every random decision in a run draws from a stream whose ChaCha key is
//! derived from `(run seed, purpose, step, k1, k2)`. ChaCha is a keyed
//! pseudo-random function, so streams for distinct keys are independent and
//! a stream can be rebuilt anywhere without knowing what other streams were
//! used before it. That is what makes a run independent of how locations are
//! spread over workers and of the order in which they are visited.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Part of the key so that two subsystems
/// drawing with the same `(step, k1, k2)` still get unrelated numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Initialization = 1,
    Contact = 2,
    Transmission = 3,
    InfectorMerge = 4,
    Progression = 5,
    Behavior = 6,
    Membership = 7,
    Population = 8,
}

/// Full key of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub step: i64,
    pub k1: u64,
    pub k2: u64,
}

impl RngKey {
    pub fn new(seed: u64, purpose: Purpose, step: i64, k1: u64, k2: u64) -> Self {
        Self {
            seed,
            purpose,
            step,
            k1,
            k2,
        }
    }

    fn to_seed_bytes(self) -> [u8; 32] {
        // The step is at most 56 bits in practice; the purpose tag takes the top byte.
        let tagged = ((self.purpose as u64) << 56) ^ (self.step as u64 & 0x00ff_ffff_ffff_ffff);
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&self.seed.to_le_bytes());
        bytes[8..16].copy_from_slice(&tagged.to_le_bytes());
        bytes[16..24].copy_from_slice(&self.k1.to_le_bytes());
        bytes[24..32].copy_from_slice(&self.k2.to_le_bytes());
        bytes
    }

    pub fn stream(self) -> KeyedRng {
        KeyedRng {
            inner: ChaCha8Rng::from_seed(self.to_seed_bytes()),
        }
    }
}

/// Shorthand for `RngKey::new(..).stream()`.
pub fn stream(seed: u64, purpose: Purpose, step: i64, k1: u64, k2: u64) -> KeyedRng {
    RngKey::new(seed, purpose, step, k1, k2).stream()
}

/// A random stream bound to one key.
#[derive(Debug, Clone)]
pub struct KeyedRng {
    inner: ChaCha8Rng,
}

impl KeyedRng {
    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe to pass to `ln`.
    pub fn uniform_open_closed(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        self.inner.random_range(lo..=hi)
    }
}

impl RngCore for KeyedRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// 64-bit mixing of a string, used to turn model names into key components.
pub fn hash_str(s: &str) -> u64 {
    // FNV-1a followed by a splitmix finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(h)
}

pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
