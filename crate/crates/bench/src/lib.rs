//! Input builders shared by the benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yieldcast::dataset::{generate_synthetic, SyntheticConfig};
use yieldcast::ensemble::PredictionMatrix;
use yieldcast::preprocess::{prepare, BuildOptions, PreparedFeatures, DEFAULT_RATIOS};

/// A normalized synthetic feature matrix of `locations * years * genotypes` rows.
pub fn features(locations: usize, years: usize, genotypes: usize) -> PreparedFeatures {
    let config = SyntheticConfig {
        locations,
        years,
        genotypes,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&config, 1).expect("synthetic dataset");
    prepare(&data.dataset, BuildOptions::default(), DEFAULT_RATIOS, 1).expect("prepared features")
}

/// `k` noisy copies of a random target vector of length `n`.
pub fn predictions(n: usize, k: usize, seed: u64) -> PredictionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..80.0)).collect();
    let cols = (0..k)
        .map(|j| {
            let col = y.iter().map(|v| v + rng.random_range(-3.0..3.0)).collect();
            (format!("m{j}"), col)
        })
        .collect();
    PredictionMatrix::from_columns(cols, y).expect("prediction matrix")
}

/// A dense regression problem with a sparse true coefficient vector.
pub fn regression(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0));
    let y = x
        .rows()
        .into_iter()
        .map(|r| 3.0 * r[0] - 2.0 * r[p / 2] + rng.random_range(-0.1..0.1))
        .collect();
    (x, y)
}
