//! CNN-DNN and CNN-LSTM-DNN yield regressors.
//!
//! Both architectures run a separate convolution stack over each weather
//! variable's 53 periods and a linear dense branch over the one-hot columns,
//! then join them in a three-layer ReLU head with a single linear output.

mod config;
mod model;
mod network;
mod train;

pub use config::{ArchitectureConfig, ArchitectureKind, ConvSpec, DropoutConfig, TrainConfig};
pub use model::TrainedModel;
pub use network::{InputLayout, Network};
pub use train::{train, HistoryEntry, TrainingHistory};
