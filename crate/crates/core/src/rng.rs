//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! master seed and a `(node, purpose)` pair, so adding draws in one place never
//! shifts the sequence seen elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Sampling of the mean-reward tables.
    Environment = 1,
    /// Reward noise of one node.
    Noise = 2,
    /// Policy randomization of one node (wait-phase arm, uniform plays).
    Policy = 3,
}

pub fn stream(master_seed: u64, node: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((purpose as u64) << 40) | node as u64);
    rng
}
