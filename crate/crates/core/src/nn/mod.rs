//! Secure CNN layers.

pub mod fit;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod zoo;

use thiserror::Error;

use crate::protocols::ProtocolError;

pub use fit::{fit_activation, PolyFit};
pub use layers::{run_network, validate, LayerSpec, NetworkOutput, RunConfig};
pub use model::Model;
pub use tensor::{SecureTensor, Tensor};
pub use zoo::{random_image, toy_lenet};

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("layer {layer} ({kind}): {reason}")]
    Validation {
        layer: usize,
        kind: &'static str,
        reason: String,
    },
    #[error("model: {0}")]
    Model(String),
    #[error("fit: {0}")]
    Fit(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}
