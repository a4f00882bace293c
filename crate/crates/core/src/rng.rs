//! Seedable, splittable random streams.
//!
//! Every stochastic consumer (one crossbar's write draws, one device's
//! fabrication sample, one replicate's shuffling) gets its own ChaCha8
//! stream derived from the run seed and a purpose-specific key, so results
//! do not depend on the order in which independent consumers are driven.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags keep streams for different consumers disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamKind {
    Fabrication = 1,
    Write = 2,
    Init = 3,
    Shuffle = 4,
    Split = 5,
    Reference = 6,
    Program = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of keys into a new 64-bit seed.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Independent stream for `(seed, kind, index)`.
///
/// The index selects the ChaCha stream number, so e.g. device `k` of a
/// crossbar always sees the same fabrication sample regardless of how many
/// other devices were sampled before it.
pub fn stream(seed: u64, kind: StreamKind, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[kind as u64]));
    rng.set_stream(index);
    rng
}
