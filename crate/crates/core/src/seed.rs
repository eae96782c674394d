//! Deterministic seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream whose seed is a
//! pure function of a root seed and a path of integers (iteration, fold,
//! repeat, ...). Parallel and serial schedules therefore see the same streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `root` with each element of `path` in order.
pub fn derive(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x2545_F491_4F6C_DD1D))))
}

pub fn rng(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, path))
}

// Stream tags, so that different consumers of the same root never collide.
pub const TAG_SHADOW: u64 = 1;
pub const TAG_PERMUTE: u64 = 2;
pub const TAG_MODEL: u64 = 3;
pub const TAG_FOLDS: u64 = 4;
