//! Initializations other than the hypernetwork: He-random, first-order
//! MAML and a single pretrained surrogate.

mod maml;
mod pretrain;

pub use maml::{adapt, maml_train, maml_train_tasks, meta_gradient, tasks_from_records, MamlConfig, MamlReport, MamlTask, FULL_MAML_EPOCHS};
pub use pretrain::{pretrain, pretrain_from, PretrainConfig, PretrainReport};

use thiserror::Error;

use crate::nn::{he_init, NnError};
use crate::rng::Rng;
use crate::surrogate::{ParamVector, SurrogateError, Topology};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("program {0} has no training rows")]
    NoRows(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("aborted after {0} consecutive non-finite batches")]
    NonFinite(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// He-normal weights and zero biases, flattened in surrogate layout.
pub fn random_init(topology: &Topology, rng: &mut Rng) -> ParamVector {
    let mut v = Vec::with_capacity(topology.param_count());
    for (i, o) in topology.layers() {
        v.extend(he_init(&[o, i], rng).expect("layer widths are positive").into_data());
        v.extend(std::iter::repeat_n(0.0, o));
    }
    ParamVector::new(v)
}

/// [`random_init`] from a seed.
pub fn random_init_seeded(topology: &Topology, seed: u64) -> ParamVector {
    random_init(topology, &mut Rng::new(seed))
}
