//! Reference benchmark kernels, their input generators, and the
//! single-versus-double precision study.

mod datasets;
mod kernels;

pub use datasets::{downcast_mse, gen_inputs, gen_inputs_sized, BenchDataset, BenchSizes};
pub use kernels::{Kernel, Real};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{kernel} takes {expected} inputs, got {got}")]
    Arity { kernel: &'static str, expected: usize, got: usize },
    #[error("unknown kernel {0:?}")]
    UnknownKernel(String),
    #[error("no finite rows to evaluate")]
    Empty,
}

/// Distance in units in the last place between two values of the same
/// precision. NaN equals NaN; otherwise NaN is infinitely far.
pub fn ulp_distance_f32(a: f32, b: f32) -> u64 {
    if a.is_nan() && b.is_nan() {
        return 0;
    }
    if a.is_nan() || b.is_nan() {
        return u64::MAX;
    }
    let key = |v: f32| {
        let bits = v.to_bits() as i64;
        if bits < 0x8000_0000 { bits } else { 0x8000_0000 - bits }
    };
    key(a).abs_diff(key(b))
}

pub fn ulp_distance_f64(a: f64, b: f64) -> u64 {
    if a.is_nan() && b.is_nan() {
        return 0;
    }
    if a.is_nan() || b.is_nan() {
        return u64::MAX;
    }
    let key = |v: f64| {
        let bits = v.to_bits() as i128;
        if bits < 1 << 63 { bits } else { (1i128 << 63) - bits }
    };
    key(a).abs_diff(key(b)) as u64
}
