//! Neural surrogate compilation workbench.
//!
//! Mines executable numeric C functions into an input/output corpus, trains a
//! hypernetwork that maps program text to the weights of a small fixed
//! surrogate MLP, and compares those initializations with random, MAML and
//! pretrained baselines.

pub mod baselines;
pub mod benchkit;
pub mod corpus;
pub mod evalkit;
pub mod hypernet;
pub mod nn;
pub mod quantize;
pub mod surrogate;
pub mod rng;
