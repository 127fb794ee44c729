//! Turns a joined dataset into a model-ready feature matrix.

mod cache;
mod downsample;
mod encode;
mod matrix;
mod normalize;
mod split;

pub use cache::{read_feature_cache, write_feature_cache};
pub use downsample::{downsample_weather, DownsamplePolicy, PERIODS};
pub use encode::one_hot_encode;
pub use matrix::{
    build_feature_matrix, weather_features, BuildOptions, ColumnGroup, FeatureManifest, FeatureMatrix, GroupKind,
    RowKey, GROUP_GENOTYPE, GROUP_LOCATION, GROUP_MG, GROUP_YEAR, WEATHER_COLUMNS,
};
pub use normalize::{zscore_apply, zscore_fit, Normalizer};
pub use split::{split, SplitIndices, DEFAULT_RATIOS};

use crate::dataset::JoinedDataset;
use crate::error::Result;

/// A normalized feature matrix with the split and statistics that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFeatures {
    pub matrix: FeatureMatrix,
    pub normalizer: Normalizer,
    pub split: SplitIndices,
    pub options: BuildOptions,
    pub content_hash: String,
}

/// Encode, split, then z-score the weather block with training-row statistics.
pub fn prepare(
    dataset: &JoinedDataset,
    options: BuildOptions,
    ratios: [f64; 3],
    split_seed: u64,
) -> Result<PreparedFeatures> {
    let mut matrix = build_feature_matrix(dataset, options)?;
    let split = split(matrix.n_rows(), ratios, split_seed)?;
    let normalizer = Normalizer::fit_columns(matrix.values.view(), &split.train, &matrix.manifest.weather_columns())?;
    normalizer.apply_in_place(&mut matrix.values)?;
    let content_hash = matrix.content_hash();
    Ok(PreparedFeatures {
        matrix,
        normalizer,
        split,
        options,
        content_hash,
    })
}
