//! Deterministic seed splitting.
//!
//! Every random stream is a ChaCha8 generator seeded from the root seed and
//! placed on its own stream number `purpose * 2^40 + index`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Source = 1,
    Channel = 2,
    Exploration = 3,
    Evaluation = 4,
    Stability = 5,
    PolicySample = 6,
}

pub fn stream(root: u64, purpose: Purpose, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((purpose as u64) << 40) + index);
    rng
}
