//! Splittable seed derivation.
//!
//! Every random stream in the simulator is keyed by a master seed plus a
//! path of integer indices (trial, user, antenna, tap, ...). Each index is
//! folded into the running state with the SplitMix64 finalizer, so streams
//! are independent of evaluation order and of the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and an index path.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(master), |acc, &i| splitmix(acc ^ splitmix(i)))
}

/// Seeded generator for the stream at `path` under `master`.
pub fn rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}
