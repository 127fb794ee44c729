//! Crop-yield prediction toolkit: weather/genotype ingestion, feature
//! preprocessing, CNN and CNN-LSTM regressors on a small reverse-mode
//! differentiation engine, simplex-weighted ensembles, a LASSO baseline,
//! evaluation metrics, permutation importance and genotype selection.

pub mod analysis;
pub mod baselines;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod models;
pub mod nn;
pub mod preprocess;

pub use error::{Error, Result};
