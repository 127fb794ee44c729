use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, LrSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchitectureKind {
    CnnDnn,
    CnnLstmDnn,
}

impl ArchitectureKind {
    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::CnnDnn => "cnn-dnn",
            ArchitectureKind::CnnLstmDnn => "cnn-lstm-dnn",
        }
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn-dnn" => Ok(ArchitectureKind::CnnDnn),
            "cnn-lstm-dnn" => Ok(ArchitectureKind::CnnLstmDnn),
            other => Err(Error::Config(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Dropout ratios. `after_cnn` follows the post-CNN dense layer in the
/// CNN-DNN and the stacked conv sequence in the CNN-LSTM-DNN; `after_lstm`
/// is only used by the latter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutConfig {
    pub after_cnn: f64,
    pub after_lstm: f64,
    pub after_others: f64,
    pub final_layer: f64,
}

impl DropoutConfig {
    pub const NONE: DropoutConfig = DropoutConfig {
        after_cnn: 0.0,
        after_lstm: 0.0,
        after_others: 0.0,
        final_layer: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub kind: ArchitectureKind,
    /// Per-variable conv stack, each layer followed by ReLU.
    pub conv: Vec<ConvSpec>,
    /// Dense width after the flattened conv streams (CNN-DNN only).
    pub post_cnn_units: usize,
    /// Dense width of the linear one-hot branch.
    pub others_units: usize,
    pub head_units: [usize; 3],
    /// Present only for the CNN-LSTM-DNN.
    pub lstm_units: Option<usize>,
    pub dropout: DropoutConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ArchitectureConfig {
    pub fn cnn_dnn() -> Self {
        Self {
            kind: ArchitectureKind::CnnDnn,
            conv: vec![
                ConvSpec {
                    filters: 16,
                    kernel: 9,
                    stride: 1,
                },
                ConvSpec {
                    filters: 16,
                    kernel: 3,
                    stride: 2,
                },
            ],
            post_cnn_units: 128,
            others_units: 64,
            head_units: [96, 64, 32],
            lstm_units: None,
            dropout: DropoutConfig {
                after_cnn: 0.5,
                after_lstm: 0.0,
                after_others: 0.7,
                final_layer: 0.2,
            },
            seed: 0,
        }
    }

    pub fn cnn_lstm_dnn() -> Self {
        Self {
            kind: ArchitectureKind::CnnLstmDnn,
            lstm_units: Some(128),
            dropout: DropoutConfig {
                after_cnn: 0.5,
                after_lstm: 0.5,
                after_others: 0.7,
                final_layer: 0.2,
            },
            ..Self::cnn_dnn()
        }
    }

    pub fn for_kind(kind: ArchitectureKind) -> Self {
        match kind {
            ArchitectureKind::CnnDnn => Self::cnn_dnn(),
            ArchitectureKind::CnnLstmDnn => Self::cnn_lstm_dnn(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn without_dropout(mut self) -> Self {
        self.dropout = DropoutConfig::NONE;
        self
    }

    /// Length of the conv output for an input of `periods` steps.
    pub fn conv_output_len(&self, periods: usize) -> Result<usize> {
        let mut len = periods;
        for (i, c) in self.conv.iter().enumerate() {
            if c.kernel == 0 || c.stride == 0 || c.filters == 0 {
                return Err(Error::Config(format!(
                    "conv layer {i}: filters, kernel and stride must be positive"
                )));
            }
            if c.kernel > len {
                return Err(Error::shape(
                    format!("conv layer {i}"),
                    format!("kernel <= {len}"),
                    format!("kernel {}", c.kernel),
                ));
            }
            len = crate::nn::conv_output_len(len, c.kernel, c.stride);
        }
        Ok(len)
    }

    pub fn validate(&self, periods: usize) -> Result<()> {
        if self.conv.is_empty() {
            return Err(Error::Config("conv stack is empty".into()));
        }
        self.conv_output_len(periods)?;
        let widths = [
            self.others_units,
            self.head_units[0],
            self.head_units[1],
            self.head_units[2],
        ];
        if widths.contains(&0) || (self.kind == ArchitectureKind::CnnDnn && self.post_cnn_units == 0) {
            return Err(Error::Config("dense widths must be positive".into()));
        }
        match (self.kind, self.lstm_units) {
            (ArchitectureKind::CnnDnn, Some(_)) => {
                return Err(Error::Config("lstm_units is only valid for cnn-lstm-dnn".into()))
            }
            (ArchitectureKind::CnnLstmDnn, None | Some(0)) => {
                return Err(Error::Config("cnn-lstm-dnn requires lstm_units > 0".into()))
            }
            _ => {}
        }
        let d = self.dropout;
        for (name, r) in [
            ("after_cnn", d.after_cnn),
            ("after_lstm", d.after_lstm),
            ("after_others", d.after_others),
            ("final_layer", d.final_layer),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("dropout {name} must be in [0, 1), got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub log_interval: usize,
    #[serde(default)]
    pub schedule: LrSchedule,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 800_000,
            batch_size: 48,
            seed: 0,
            log_interval: 2500,
            schedule: LrSchedule::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 || self.log_interval == 0 {
            return Err(Error::Config(
                "iterations, batch_size and log_interval must be positive".into(),
            ));
        }
        if !(self.schedule.base > 0.0 && self.schedule.base.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.schedule.base
            )));
        }
        Ok(())
    }
}
