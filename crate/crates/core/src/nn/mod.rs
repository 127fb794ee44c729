//! Minimal reverse-mode differentiation for the dense, convolutional and
//! recurrent layers used by the yield models.

mod checkpoint;
mod gradcheck;
mod graph;
pub mod init;
mod kernels;
mod loss;
mod optim;
mod tensor;

pub use checkpoint::{decode_params, encode_params, load_params, save_params};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_FLOOR};
pub use graph::{conv_output_len, Gradients, Graph, Mode, NodeId, ParamId, ParamStore};
pub use loss::mse_loss;
pub use optim::{Adam, AdamConfig, LrSchedule};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
