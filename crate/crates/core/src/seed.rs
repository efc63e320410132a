//! Counter-based seed derivation for Monte-Carlo trials.
//!
//! A trial's 256-bit ChaCha key is produced by a SplitMix64 chain over
//! `(master_seed, trial_index)`. Inside a trial, ChaCha stream 0 is shared
//! (large-scale fading) and stream `k + 1` belongs to user `k`, so every
//! (trial, user) pair owns an independent sequence regardless of evaluation
//! order or the total number of users.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    key: [u8; 32],
}

impl SeedStream {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        let mut state = master_seed;
        let base = splitmix64(&mut state);
        let mut state = base ^ trial_index.wrapping_mul(GOLDEN_GAMMA).rotate_left(17);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        SeedStream { key }
    }

    /// Stream for draws that are not tied to a single user.
    pub fn shared(&self) -> ChaCha8Rng {
        self.stream(0)
    }

    pub fn user(&self, user: usize) -> ChaCha8Rng {
        self.stream(user as u64 + 1)
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng
    }
}
