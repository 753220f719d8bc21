use super::{NnError, Tensor};
use crate::rng::Rng;

/// He (Kaiming) normal initialization: `N(0, 2 / fan_in)`.
///
/// Weight shapes follow the `[out x in]` convention, so fan-in is the last
/// extent.
pub fn he_init(shape: &[usize], rng: &mut Rng) -> Result<Tensor, NnError> {
    let fan_in = shape.last().copied().unwrap_or(0);
    if fan_in == 0 {
        return Err(NnError::ZeroFanIn(shape.to_vec()));
    }
    Ok(he_normal(shape, fan_in, rng))
}

/// He normal samples with an explicit fan-in.
pub fn he_normal(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.normal() * std).collect();
    Tensor::new(shape.to_vec(), data).expect("shape product")
}

pub fn zeros_bias(len: usize) -> Tensor {
    Tensor::zeros(&[len])
}
