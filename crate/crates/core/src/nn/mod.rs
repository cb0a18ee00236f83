//! A small batch-major network engine: dense, axis convolution, max-pooling,
//! activations and softmax, with backpropagation and plain SGD.
//!
//! Parameters are held in `f64` but every value is representable in `f32`:
//! initialization draws single-precision values and each SGD step rounds
//! its result, so checkpoints (stored as `f32`) round-trip bit-exactly.

mod checkpoint;
mod graph;
mod layer;
mod loss;

pub use checkpoint::NNG_MAGIC;
pub(crate) use checkpoint::{put_u32, ByteReader};
pub use graph::{
    sgd_step, FusionLayout, Gradients, InputSource, InputView, LedgerEntry, Mode, ModelInput,
    NetworkGraph, Place, Stream,
};
pub use layer::{Activation, ConvAxis, Layer, LayerSpec};
pub use loss::{cross_entropy_with, mse_loss, mse_with, softmax_cross_entropy, Loss, Reduction};

/// Batch-major activations and parameter tensors.
pub type Matrix = ndarray::Array2<f64>;
