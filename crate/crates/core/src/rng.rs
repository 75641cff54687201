//! Reproducible random streams derived from `(seed, block path)`.
//!
//! Every compressed block owns its own ChaCha8 stream: the 256-bit key is
//! expanded from the run seed and the 64-bit stream selector is a hash of the
//! block's position in the traversal. No generator state is shared, so the
//! samples drawn for a block do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Stream = ChaCha8Rng;

/// Position of a block task in the traversal plus a free draw counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BlockId {
    pub level: u32,
    pub target_cell: (u32, u32),
    pub source_cell: (u32, u32),
    /// Distinguishes several streams for the same block (e.g. realizations).
    pub draw: u32,
}

impl BlockId {
    pub fn new(level: u32, target_cell: (u32, u32), source_cell: (u32, u32)) -> Self {
        Self {
            level,
            target_cell,
            source_cell,
            draw: 0,
        }
    }

    pub fn with_draw(mut self, draw: u32) -> Self {
        self.draw = draw;
        self
    }

    fn selector(&self) -> u64 {
        let words = [
            self.level as u64,
            self.target_cell.0 as u64,
            self.target_cell.1 as u64,
            self.source_cell.0 as u64,
            self.source_cell.1 as u64,
            self.draw as u64,
        ];
        words
            .iter()
            .fold(0x6a09_e667_f3bc_c908u64, |h, &w| splitmix64(h ^ splitmix64(w)))
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a labelled sub-experiment (realization index, sweep point).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ label.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Stream owned by block `id` under run seed `seed`.
pub fn derive_stream(seed: u64, id: &BlockId) -> Stream {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(id.selector());
    rng
}
