//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from a
//! base seed and a purpose, so that e.g. an evaluator's choices never shift
//! the draws used to build a world.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// What a stream is used for. The discriminant selects the ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    World = 1,
    Clones = 2,
    Scores = 3,
    Evaluator = 4,
    Auxiliary = 5,
}

/// Independent stream for `(seed, purpose, label)`.
///
/// `label` distinguishes consumers of the same purpose (for instance the
/// algorithm name); the empty label is fine when there is only one.
pub fn stream(seed: u64, purpose: Purpose, label: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ fnv1a(label.as_bytes())));
    rng.set_stream(purpose as u64);
    rng
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
