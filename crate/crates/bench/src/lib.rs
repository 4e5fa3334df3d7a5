//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strokecast::synth::{generate_dataset, SynthConfig};
use strokecast::Dataset;

/// `n` clustered vectors of dimension `dim`, resembling feature strokes.
pub fn clustered_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..12)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            centres[i % centres.len()]
                .iter()
                .map(|c| c + 0.3 * (rng.random::<f64>() - 0.5))
                .collect()
        })
        .collect()
}

/// A small synthetic dataset: `writers` per gender, one word, four sessions.
pub fn small_dataset(writers: usize) -> Dataset {
    generate_dataset(
        &SynthConfig {
            writers_per_gender: writers,
            seed: 1,
            ..SynthConfig::default()
        }
        .with_words(&["DESAPROVECHAMIENTO"]),
    )
}
