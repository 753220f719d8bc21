//! Minimal dense reverse-mode autodiff, optimizers and initializers.

mod init;
mod optim;
mod tape;
mod tensor;

pub use init::{he_init, he_normal, zeros_bias};
pub use optim::{Adam, AdamConfig, ParamId, ParamSet, Sgd};
pub(crate) use tape::sigmoid;
pub use tape::{Gradients, Precision, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("data of length {len} does not fill shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: non-finite input")]
    NonFinite { op: &'static str },
    #[error("loss must be scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("index {index} out of range for extent {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("fan-in of shape {0:?} is zero")]
    ZeroFanIn(Vec<usize>),
}
