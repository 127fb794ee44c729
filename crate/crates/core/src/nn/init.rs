//! Seeded weight initializers.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::tensor::Tensor;

/// He-uniform: `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    uniform(shape, (6.0 / fan_in.max(1) as f64).sqrt(), rng)
}

/// `U(-limit, limit)`.
pub fn uniform(shape: &[usize], limit: f64, rng: &mut impl Rng) -> Tensor {
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    Tensor::from_fn(shape, |_| dist.sample(rng))
}

/// LSTM weights `U(-1/sqrt(H), 1/sqrt(H))`.
pub fn lstm_uniform(shape: &[usize], hidden: usize, rng: &mut impl Rng) -> Tensor {
    uniform(shape, 1.0 / (hidden.max(1) as f64).sqrt(), rng)
}

/// LSTM bias with the forget-gate block set to one.
pub fn lstm_bias(hidden: usize) -> Tensor {
    Tensor::from_fn(
        &[4 * hidden],
        |i| if (hidden..2 * hidden).contains(&i) { 1.0 } else { 0.0 },
    )
}
