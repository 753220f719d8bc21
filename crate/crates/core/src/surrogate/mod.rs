//! The covering MLP, its flat parameter vector, input padding, output
//! adaptation, input pruning and the shared finetuning loop.

mod finetune;
mod net;
mod params;

pub use finetune::{finetune, loss_and_grad, select_reported, Dataset, FinetuneConfig, FinetuneTrace, LogEntry, Splits};
pub use net::{adapt_outputs, forward_graph, pad_input, prune_inputs, OutputStrategy, PaddingMode, SurrogateNet};
pub use params::{ParamVector, Topology, MAX_INPUTS};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("parameter vector has length {got}, topology needs {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("arity {arity} exceeds the {max} available inputs")]
    ArityTooLarge { arity: usize, max: usize },
    #[error("output count must be at least 1")]
    ZeroOutputs,
    #[error("topology needs at least an input and an output layer, got {0:?}")]
    BadTopology(Vec<usize>),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid finetune config: {0}")]
    Config(String),
    #[error("dataset rows are {got} wide, network takes {expected}")]
    DataWidth { expected: usize, got: usize },
    #[error("training set is empty")]
    EmptyTrain,
    #[error("not a parameter vector file")]
    BadMagic,
    #[error("unsupported parameter vector version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
