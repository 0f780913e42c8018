//! LSTM encoder-decoder models with attention, computed in `f64` with
//! hand-written reverse-mode gradients.

mod attention;
pub mod checkpoint;
mod config;
mod lstm;
mod model;
mod params;

use std::path::PathBuf;

pub use attention::attend;
pub use checkpoint::Checkpoint;
pub use config::{
    ModelConfig, DEFAULT_DROPOUT, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_MAX_DECODE_LEN,
};
pub use lstm::{lstm_cell, sigmoid};
pub use model::{
    argmax, backward, decode_train, encode, evaluate_batch, forward, greedy_decode, loss_and_gradients,
    masked_cross_entropy, Encoding, ForwardPass,
};
pub use params::{Bridge, Gradients, LstmWeights, Parameters, TensorInfo, TensorRole, INIT_SCALE};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("non-finite value detected in {0}")]
    NonFiniteDetected(String),
    #[error("attention over a row with no non-PAD steps")]
    AllPadded,
    #[error("token id {id} outside a vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cannot access checkpoint {path}: {source}")]
    CheckpointIo { path: PathBuf, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}
