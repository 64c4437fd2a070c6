//! Counter-based random streams.
//!
//! Every Monte Carlo estimator splits its samples into fixed-size blocks and
//! draws block `b` from the ChaCha stream `(seed, b)`. Results therefore do
//! not depend on how blocks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per independent stream.
pub const BLOCK: usize = 4096;

/// RNG for block `block` of the run seeded by `seed`.
pub fn stream(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Evaluate `draw` once per sample index in `0..n`, in blocks, and return the
/// values in index order.
///
/// `draw` receives the block RNG and must consume it the same way for every
/// sample so that results are reproducible.
pub fn sample_values<F>(seed: u64, n: usize, draw: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let per_block: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(n - b * BLOCK);
            let mut rng = stream(seed, b as u64);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    per_block.into_iter().flatten().collect()
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
