use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Seeded random partition of `0..n` into train/validation/test.
///
/// Sizes are apportioned by largest remainder: each part gets the floor of
/// its quota and leftover rows go to the largest fractional parts (ties to
/// the earlier part). For n = 93,028 this yields 74,422 / 9,303 / 9,303.
/// Each index list is returned sorted.
pub fn split(n: usize, ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if n < 10 {
        return Err(Error::InvalidInput(format!("split needs at least 10 rows, got {n}")));
    }
    if ratios.iter().any(|r| r.is_nan() || *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let sizes = apportion(n, ratios);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx.split_off(sizes[0] + sizes[1]);
    let mut validation = idx.split_off(sizes[0]);
    let mut train = idx;
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
        seed,
    })
}

fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let quotas = ratios.map(|r| r * n as f64);
    let mut sizes = quotas.map(|q| q.floor() as usize);
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}
