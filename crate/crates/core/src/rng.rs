//! Reproducible random streams and the deterministic parallel map.
//!
//! Every Monte Carlo sample `i` of a run seeded with `seed` draws from its own
//! ChaCha stream `(seed, i)`. Results therefore depend only on `(seed, i)`,
//! never on how samples are distributed over worker threads, and merges are
//! done in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the generator keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent key from `(seed, tag)` (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Worker count; `0` means the global rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Jobs(pub usize);

impl Jobs {
    pub fn install<R: Send>(self, op: impl FnOnce() -> R + Send) -> R {
        if self.0 == 0 {
            return op();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.0).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }
}

/// Maps `f` over `0..n` in parallel and returns the results in index order.
pub fn par_map<T, F>(n: usize, jobs: Jobs, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    jobs.install(|| (0..n).into_par_iter().map(&f).collect())
}
