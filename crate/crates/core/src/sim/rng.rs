//! SplitMix64 stream used for every measurement draw.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output mixer, without the state increment.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of shot `shot_index` under `master_seed`.
#[inline]
pub fn derive_shot_seed(master_seed: u64, shot_index: u64) -> u64 {
    mix64(master_seed.wrapping_add(shot_index).wrapping_add(1))
}

/// Deterministic SplitMix64 stream.
///
/// Advancing is the only mutation, so two streams built from the same seed
/// produce the same draws forever. `draws` counts consumed values and is what
/// the replay alignment checks compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    state: u64,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed, draws: 0 }
    }

    pub fn for_shot(master_seed: u64, shot_index: u64) -> Self {
        Self::new(derive_shot_seed(master_seed, shot_index))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        self.draws += 1;
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    /// Number of values drawn since construction.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}

/// Standalone form of one unit draw: advances `rng` and returns the value.
pub fn rng_next_unit(rng: &mut RngStream) -> f64 {
    rng.next_unit()
}
