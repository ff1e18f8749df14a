//! Small differentiable core: dense matrices, a reverse-mode tape, MLP and
//! GRU networks, Adam, gradient clipping and target-network updates.

pub mod checkpoint;
pub mod graph;
pub mod net;
pub mod optim;
pub mod params;
pub mod tensor;

use thiserror::Error;

pub use checkpoint::Checkpoint;
pub use graph::{Graph, NodeId};
pub use net::{forward, Body, GruCell, Linear, Net, NetSpec, HIDDEN_GAIN, POLICY_GAIN, VALUE_GAIN};
pub use optim::{clip_global_norm, Adam, AdamConfig, TargetUpdate};
pub use params::{Gradients, ParamId, ParamStore};
pub use tensor::{Matrix, Real};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("recurrent network needs a hidden state")]
    MissingHidden,
    #[error("feed-forward network takes no hidden state")]
    UnexpectedHidden,
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint has no array named {0}")]
    MissingArray(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
