use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ArchitectureConfig;
use super::network::Network;
use super::train::TrainingHistory;
use crate::error::{Error, Result};
use crate::nn::{load_params, save_params};
use crate::preprocess::{FeatureManifest, FeatureMatrix, Normalizer};

/// A trained network with the preprocessing context it was fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub normalizer: Normalizer,
    /// Content hash of the feature cache used for training.
    pub feature_hash: String,
    pub history: TrainingHistory,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    config: ArchitectureConfig,
    manifest: FeatureManifest,
    normalizer: Normalizer,
    feature_hash: String,
    history: TrainingHistory,
}

impl TrainedModel {
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.network.predict(matrix)
    }

    pub fn manifest(&self) -> &FeatureManifest {
        self.network.manifest()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ModelHeader {
            config: self.network.config().clone(),
            manifest: self.network.manifest().clone(),
            normalizer: self.normalizer.clone(),
            feature_hash: self.feature_hash.clone(),
            history: self.history.clone(),
        };
        save_params(path, &header, self.network.params())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, params): (ModelHeader, _) = load_params(path)?;
        let network = Network::from_parts(header.config, &header.manifest, params)
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(Self {
            network,
            normalizer: header.normalizer,
            feature_hash: header.feature_hash,
            history: header.history,
        })
    }
}
