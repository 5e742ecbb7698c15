//! Dense tensor math with reverse-mode gradients, plus the MLP and LSTM
//! networks used as derivative functions and baselines.

mod activation;
mod backend;
mod checkpoint;
mod lstm;
mod mlp;
mod params;
mod tape;
mod tensor;

pub use activation::{Activation, SELU_ALPHA, SELU_LAMBDA};
pub use backend::{Backend, Eager};
pub use checkpoint::{Checkpoint, ModelKind, ParamEntry, SpecDocument, FORMAT_VERSION};
pub use lstm::{lstm_forward, step as lstm_step, LstmSpec, LstmState};
pub use mlp::{forward as mlp_forward_with, mlp_forward, MlpSpec};
pub use params::{fan_in_bound, init_uniform, ParamSet};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("dimension error: {0}")]
    Shape(String),
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
}
