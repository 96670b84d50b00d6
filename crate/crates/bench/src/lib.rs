//! Fixed-seed instances shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sonclust_core::Dataset;

/// `n` points in `d` dimensions drawn around `blobs` well-separated centers.
pub fn blobs(n: usize, d: usize, blobs: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..blobs)
        .map(|_| {
            (0..d)
                .map(|_| 5.0 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            centers[i % blobs]
                .iter()
                .map(|c| c + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Dataset::from_rows(&rows).expect("finite rows")
}
