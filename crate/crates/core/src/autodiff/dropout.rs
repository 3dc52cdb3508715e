use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Tensor;

/// Inverted-dropout mask: each entry is `0` with probability `rate`, else
/// `1 / (1 - rate)`.
///
/// Variational dropout samples one mask per sequence and multiplies it into
/// the input of every timestep, so callers draw the mask once and reuse it.
pub fn variational_dropout_mask<T: Scalar>(shape: &[usize], rate: f64, seed: u64) -> Result<Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_mask(shape, rate, &mut rng)
}

/// Same as [`variational_dropout_mask`] but draws from a caller-owned RNG.
pub fn sample_mask<T: Scalar, R: Rng + ?Sized>(shape: &[usize], rate: f64, rng: &mut R) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::parameter(format!("dropout rate {rate} outside [0, 1)")));
    }
    let len: usize = shape.iter().product();
    let data = if rate == 0.0 {
        vec![T::one(); len]
    } else {
        let keep = T::lit(1.0 / (1.0 - rate));
        (0..len).map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep }).collect()
    };
    Tensor::new(shape.to_vec(), data)
}
