//! A small CPU neural-network stack: tensors, layers with hand-written
//! backpropagation, Adam, MSE and a binary weights format.

mod adam;
mod layer;
mod loss;
mod network;
pub mod presets;
mod scalar;
mod tensor;
mod weights;

pub use adam::{AdamConfig, AdamState};
pub use layer::LayerKind;
pub use loss::mse_loss;
pub use network::{Gradients, InputGradients, Network, NetworkBuilder, Tape};
pub use presets::{ConvNetConfig, MlpConfig};
pub use scalar::Real;
pub use tensor::Tensor;
pub use weights::{load_weights, read_weights_file, save_weights, write_weights_file, MAGIC, VERSION};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("layer {layer} ({kind}): expected input shape {expected:?}, got {actual:?}")]
    Shape {
        layer: usize,
        kind: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("auxiliary input: expected length {expected}, got {actual}")]
    AuxLength { expected: usize, actual: usize },
    #[error("network has more than one auxiliary injection layer")]
    MultipleAux,
    #[error("backward called before forward")]
    NoForward,
    #[error("loss operands differ in length ({pred} vs {target})")]
    LossShape { pred: usize, target: usize },
    #[error("non-finite gradient in tensor {tensor}")]
    NonFinite { tensor: usize },
    #[error("expected {expected} tensors, got {actual}")]
    TensorCount { expected: usize, actual: usize },
    #[error("tensor {tensor}: expected shape {expected:?}, got {actual:?}")]
    ParamShape {
        tensor: usize,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("not a weights file (bad magic)")]
    BadMagic,
    #[error("unsupported weights version {0}")]
    UnsupportedVersion(u32),
    #[error("weights file truncated")]
    Truncated,
    #[error("{0} trailing bytes after last tensor")]
    TrailingBytes(usize),
    #[error("io: {0}")]
    Io(String),
}
