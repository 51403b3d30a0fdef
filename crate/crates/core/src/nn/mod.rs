//! Small double-precision neural toolkit: conv/dense/leaky-ReLU networks,
//! a bidirectional LSTM, MSE loss, Adam, finite-difference gradient checks
//! and a binary weights container.

mod adam;
mod container;
mod gradcheck;
mod layers;
mod loss;
mod lstm;
mod network;
mod tensor;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use container::{WeightsContainer, CONTAINER_VERSION};
pub use gradcheck::{grad_check, grad_check_report, relative_error, GradCheckOptions, GradCheckReport, Objective};
pub use layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, layer_backward, layer_forward, leaky_relu,
    leaky_relu_backward, LayerSpec,
};
pub use loss::mse_loss;
pub use lstm::{BiLstm, LstmTrace};
pub use network::{Network, NetworkObjective, Trace};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("weights format: {0}")]
    Format(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
