//! The neural surrogate compiler: C-aware tokenizer, a small transformer
//! encoder read out at [CLS], and a linear head emitting surrogate weights.

mod checkpoint;
mod model;
mod tokenize;
mod train;

pub use model::{EncoderConfig, HypernetModel};
pub use tokenize::{tokenize, Vocab, CLS, CLS_ID, DEFAULT_VOCAB_SIZE, MAX_TOKENS, PAD, PAD_ID, UNK, UNK_ID};
pub use train::{mean_compiled_loss, train, train_model, HypernetTrainConfig, TrainReport};

use thiserror::Error;

use crate::nn::NnError;
use crate::surrogate::SurrogateError;

#[derive(Debug, Error)]
pub enum HypernetError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("sequence of {len} tokens exceeds the limit of {max}")]
    TooLong { len: usize, max: usize },
    #[error("token id {id} outside vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },
    #[error("program {0} has no training rows")]
    NoRows(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("aborted after {0} consecutive non-finite batches")]
    NonFiniteAbort(usize),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
