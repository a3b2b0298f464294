//! Parameter initialisers. Values are rounded to f32 precision.

use rand::Rng;

use super::Tensor;

/// Uniform in `+-sqrt(6 / fan_in)` (ReLU paths).
pub fn kaiming_uniform(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    uniform(shape, (6.0 / fan_in as f64).sqrt(), rng)
}

/// Uniform in `+-sqrt(6 / (fan_in + fan_out))` (gate layers).
pub fn xavier_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    uniform(shape, (6.0 / (fan_in + fan_out) as f64).sqrt(), rng)
}

pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let values = (0..n)
        .map(|_| rng.random_range(-bound..=bound) as f32 as f64)
        .collect();
    Tensor::from_vec(shape, values).expect("shape product matches")
}
