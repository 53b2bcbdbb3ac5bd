//! Seeded Bernoulli sampling of per-block gate masks.
//!
//! All randomness in the crate goes through [`RngState`], a ChaCha8 stream
//! seeded from a 64-bit value with `ChaCha8Rng::seed_from_u64`. ChaCha8 output
//! is specified bit-for-bit and does not depend on platform or word size, so
//! a seed reproduces the same masks everywhere.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::schedule::SurvivalProfile;

#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for a sub-component: `seed + offset`.
    pub fn derived(seed: u64, offset: u64) -> Self {
        Self::new(seed.wrapping_add(offset))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` from the top 53 bits of one `u64` draw.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as f64;
        lo + ((self.uniform() * span) as i64).min(hi - lo)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

/// Realized alive/dead decision for every block of one forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateMask {
    alive: Vec<bool>,
    pub epoch: usize,
    pub sample_id: u64,
}

impl GateMask {
    pub fn new(alive: Vec<bool>) -> Self {
        Self {
            alive,
            epoch: 0,
            sample_id: 0,
        }
    }

    pub fn all_alive(blocks: usize) -> Self {
        Self::new(vec![true; blocks])
    }

    pub fn all_dead(blocks: usize) -> Self {
        Self::new(vec![false; blocks])
    }

    /// Mask whose bits are the low `blocks` bits of `bits` (bit 0 is block 1).
    pub fn from_bits(bits: u64, blocks: usize) -> Self {
        Self::new((0..blocks).map(|i| bits >> i & 1 == 1).collect())
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    /// Whether block `l` (1-based) is alive.
    pub fn is_alive(&self, l: usize) -> bool {
        self.alive[l - 1]
    }

    pub fn blocks(&self) -> usize {
        self.alive.len()
    }
}

/// One independent Bernoulli(p_l) draw per block, consuming exactly one
/// `u64` per block regardless of `p_l`.
pub fn sample_mask(profile: &SurvivalProfile, rng: &mut RngState) -> GateMask {
    let alive = profile.probs().iter().map(|&p| rng.uniform() < p).collect();
    GateMask::new(alive)
}

pub fn realized_depth(mask: &GateMask) -> usize {
    mask.alive.iter().filter(|&&a| a).count()
}
