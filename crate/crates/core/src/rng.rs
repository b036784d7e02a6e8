//! Counter-based random streams.
//!
//! Every random draw in a scan is keyed on `(master seed, domain, counter,
//! lane)` rather than on the order in which work happens, so results do not
//! depend on thread count or scheduling. The key selects a ChaCha8 stream:
//! the seed and domain pick the key, the counter picks the 64-bit stream id,
//! and the lane offsets the word position inside that stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes that must never share random words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Times = 1,
    SecondaryTimes = 2,
    Shots = 3,
    Shuffle = 4,
}

/// Words reserved per lane inside one stream.
const LANE_STRIDE: u128 = 1 << 40;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Position in the counter space: a master seed plus a sample counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub counter: u64,
}

impl StreamKey {
    pub fn new(seed: u64, counter: u64) -> Self {
        Self { seed, counter }
    }

    /// Generator for `(domain, lane)` at this key.
    pub fn rng(&self, domain: Domain, lane: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut z = self.seed ^ (domain as u64).wrapping_mul(0xA076_1D64_78BD_642F);
        for chunk in key.chunks_mut(8) {
            z = splitmix(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.counter);
        rng.set_word_pos(lane as u128 * LANE_STRIDE);
        rng
    }
}
