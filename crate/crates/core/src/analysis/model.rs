use ndarray::Array2;

use crate::baselines::{lasso_predict, LassoModel};
use crate::ensemble::{ensemble_predict, EnsembleWeights};
use crate::error::{Error, Result};
use crate::models::{Network, TrainedModel};
use crate::preprocess::{FeatureManifest, FeatureMatrix};

/// Anything that maps feature rows to yields.
pub trait YieldModel: Sync {
    fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>>;
    fn manifest(&self) -> &FeatureManifest;
    fn describe(&self) -> String;
}

impl YieldModel for Network {
    fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        Network::predict(self, matrix)
    }

    fn manifest(&self) -> &FeatureManifest {
        Network::manifest(self)
    }

    fn describe(&self) -> String {
        self.kind().to_string()
    }
}

impl YieldModel for TrainedModel {
    fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.network.predict(matrix)
    }

    fn manifest(&self) -> &FeatureManifest {
        self.network.manifest()
    }

    fn describe(&self) -> String {
        self.network.kind().to_string()
    }
}

/// A LASSO model paired with the layout of the columns it was fitted on.
pub struct LinearModel<'a> {
    pub model: &'a LassoModel,
    pub manifest: &'a FeatureManifest,
}

impl YieldModel for LinearModel<'_> {
    fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        if &matrix.manifest != self.manifest {
            return Err(Error::ManifestMismatch(
                "lasso model and data use different column layouts".into(),
            ));
        }
        lasso_predict(self.model, matrix.values.view())
    }

    fn manifest(&self) -> &FeatureManifest {
        self.manifest
    }

    fn describe(&self) -> String {
        "lasso".into()
    }
}

/// Weighted combination of base models.
pub struct WeightedEnsemble<'a> {
    members: Vec<&'a dyn YieldModel>,
    weights: EnsembleWeights,
}

impl<'a> WeightedEnsemble<'a> {
    pub fn new(members: Vec<&'a dyn YieldModel>, weights: EnsembleWeights) -> Result<Self> {
        if members.is_empty() || members.len() != weights.weights.len() {
            return Err(Error::shape("ensemble members", weights.weights.len(), members.len()));
        }
        if members.iter().any(|m| m.manifest() != members[0].manifest()) {
            return Err(Error::ManifestMismatch(
                "ensemble members use different column layouts".into(),
            ));
        }
        Ok(Self { members, weights })
    }

    pub fn weights(&self) -> &EnsembleWeights {
        &self.weights
    }
}

impl YieldModel for WeightedEnsemble<'_> {
    fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        let mut p = Array2::zeros((matrix.n_rows(), self.members.len()));
        for (j, m) in self.members.iter().enumerate() {
            p.column_mut(j).assign(&ndarray::Array1::from(m.predict(matrix)?));
        }
        ensemble_predict(&self.weights.weights, p.view())
    }

    fn manifest(&self) -> &FeatureManifest {
        self.members[0].manifest()
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self
            .weights
            .labels
            .iter()
            .zip(&self.weights.weights)
            .map(|(l, w)| format!("{l}:{w:.4}"))
            .collect();
        format!("GEM({})", parts.join(", "))
    }
}
