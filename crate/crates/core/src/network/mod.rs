//! Tanh feed-forward networks and the parametric hard-BC displacement ansatz.

mod ansatz;
mod checkpoint;
mod ffnn;
pub mod jets;

pub use ansatz::{ansatz_eval_generic, distance_function, Ansatz, AnsatzConfig, AnsatzOutput};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use ffnn::{ffnn_forward, forward_generic, forward_with_weights, glorot_init, FfnnConfig, NetworkParameters};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
