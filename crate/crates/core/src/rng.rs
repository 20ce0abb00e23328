//! Seeded, splittable random streams.
//!
//! Replicate `r` of a run with seed `s` always draws from ChaCha8 stream
//! `(s, r)`, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type TreeRng = ChaCha8Rng;

/// Generator for replicate `replicate` of a run seeded with `seed`.
pub fn stream(seed: u64, replicate: u64) -> TreeRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Runs `f` once per replicate in parallel and returns the results in
/// replicate order.
pub fn par_replicates<T, F>(seed: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut TreeRng) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            f(r, &mut rng)
        })
        .collect()
}
