//! Small differentiable tensor engine with explicit per-layer backward passes.
//!
//! Models are plain layer stacks described by a [`ModelConfig`]. Training runs
//! in `f32`; the same code instantiated at `f64` backs the finite-difference
//! gradient checks.

mod arch;
mod checkpoint;
mod config;
mod gradcheck;
mod layers;
mod loss;
mod model;
mod optim;
mod real;
mod tensor;
mod train;

pub use arch::{build_cnn1d, build_gaf_resnet_toy};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::{LayerSpec, ModelConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::mse_loss;
pub use model::Model;
pub use optim::{Optimizer, OptimizerKind};
pub use real::{gemm, Real};
pub use tensor::Tensor;
pub use train::{encode_input, predict, train, InputEncoding, TrainConfig, TrainReport};

use thiserror::Error;

use crate::gaf::GafError;

/// Forward-pass behaviour of mode-dependent layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics with running-stat updates, dropout active, caches kept.
    Train,
    /// Running statistics, dropout off, no caches.
    Eval,
    /// Batch statistics without running-stat updates, dropout off, caches
    /// kept. The loss is then a deterministic function of the parameters.
    Check,
}

impl Mode {
    pub fn keeps_cache(self) -> bool {
        !matches!(self, Mode::Eval)
    }
}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch{}: expected {expected:?}, got {got:?}", at(.layer))]
    ShapeMismatch {
        layer: Option<usize>,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("buffer of {len} elements does not fit shape {shape:?}")]
    BufferSize { shape: Vec<usize>, len: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("backward called without a cached training forward pass{}", at(.layer))]
    NoForwardState { layer: Option<usize> },
    #[error("invalid model config{}: {message}", at(.layer))]
    InvalidConfig { layer: Option<usize>, message: String },
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    DivergedTraining { epoch: usize, loss: f64 },
    #[error("input encoding failed for sample {sample}: {source}")]
    Encoding { sample: usize, source: GafError },
    #[error("checkpoint error at {path}: {message}")]
    Checkpoint { path: String, message: String },
}

fn at(layer: &Option<usize>) -> String {
    layer.map(|i| format!(" at layer {i}")).unwrap_or_default()
}

impl NnError {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        NnError::InvalidConfig {
            layer: None,
            message: message.into(),
        }
    }

    /// Attaches a layer index to errors that lack one.
    pub(crate) fn at_layer(self, index: usize) -> Self {
        match self {
            NnError::ShapeMismatch { layer: None, expected, got } => NnError::ShapeMismatch {
                layer: Some(index),
                expected,
                got,
            },
            NnError::NoForwardState { layer: None } => NnError::NoForwardState { layer: Some(index) },
            NnError::InvalidConfig { layer: None, message } => NnError::InvalidConfig {
                layer: Some(index),
                message,
            },
            other => other,
        }
    }
}
