//! A small fixed-menu neural network engine: valid convolution, overlapping
//! max pooling, inverted dropout, dense layers, RMSE loss and Adam, all in
//! `f64` with hand-written backpropagation.

mod activation;
mod adam;
mod checkpoint;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod network;
mod pool;
mod tensor;

pub use activation::{Activation, DEFAULT_ELU_ALPHA, DEFAULT_LEAKY_ALPHA};
pub use adam::{Adam, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, SCHEMA_VERSION};
pub use conv::{conv_forward, output_size, ConvGradients, ConvLayer};
pub use dense::{dense_forward, DenseGradients, DenseLayer};
pub use dropout::{dropout, DropoutLayer, DEFAULT_DROPOUT_RATE};
pub use gradcheck::{gradient_check, relative_error, DropoutHandling, GradCheckOptions, GradCheckReport, LayerCheck};
pub use loss::rmse_loss;
pub use network::{Layer, LayerSpec, Network};
pub use pool::{maxpool_backward, maxpool_forward, MaxPoolLayer};
pub use tensor::Tensor;
