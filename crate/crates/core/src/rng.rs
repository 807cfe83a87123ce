//! Reproducible random streams. Every Monte Carlo batch draws from its own
//! ChaCha stream selected by `(seed, batch index)`, so results do not depend
//! on how rayon schedules the batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Paths per batch in the parallel Monte Carlo drivers.
pub const BATCH_SIZE: usize = 1 << 14;

/// Independent generator for one batch.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 combination of several integers into one seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Runs `work(rng, count)` over `total` samples split into fixed batches and
/// returns the per-batch results in batch order.
pub fn par_batches<T, F>(seed: u64, total: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let batches = total.div_ceil(BATCH_SIZE);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH_SIZE.min(total - b * BATCH_SIZE);
            let mut rng = stream_rng(seed, b as u64);
            work(&mut rng, count)
        })
        .collect()
}
