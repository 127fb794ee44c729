use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::matrix::{BuildOptions, FeatureManifest, FeatureMatrix, RowKey};
use super::normalize::Normalizer;
use super::split::SplitIndices;
use super::PreparedFeatures;
use crate::error::{Error, Result};
use crate::io::{decode_container, encode_container, write_atomic};

const MAGIC: &[u8; 4] = b"YCFM";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    n_rows: usize,
    n_cols: usize,
    manifest: FeatureManifest,
    targets: Vec<f64>,
    rows: Vec<RowKey>,
    normalizer: Normalizer,
    split: SplitIndices,
    options: BuildOptions,
    content_hash: String,
}

/// Writes a prepared feature set as JSON header + raw row-major matrix.
pub fn write_feature_cache(path: &Path, prepared: &PreparedFeatures) -> Result<()> {
    let m = &prepared.matrix;
    let header = CacheHeader {
        n_rows: m.n_rows(),
        n_cols: m.n_cols(),
        manifest: m.manifest.clone(),
        targets: m.targets.clone(),
        rows: m.rows.clone(),
        normalizer: prepared.normalizer.clone(),
        split: prepared.split.clone(),
        options: prepared.options,
        content_hash: prepared.content_hash.clone(),
    };
    let payload: Vec<f64> = m.values.iter().copied().collect();
    write_atomic(path, &encode_container(MAGIC, VERSION, &header, &payload)?)
}

/// Reads a cache and verifies its embedded content hash.
pub fn read_feature_cache(path: &Path) -> Result<PreparedFeatures> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, payload): (CacheHeader, Vec<f64>) = decode_container(path, &bytes, MAGIC, VERSION)?;
    let values =
        Array2::from_shape_vec((h.n_rows, h.n_cols), payload).map_err(|e| Error::format(path, e.to_string()))?;
    if h.targets.len() != h.n_rows || h.rows.len() != h.n_rows {
        return Err(Error::format(path, "row metadata does not match matrix height"));
    }
    let matrix = FeatureMatrix {
        values,
        manifest: h.manifest,
        targets: h.targets,
        rows: h.rows,
    };
    matrix.manifest.check_partition()?;
    let actual = matrix.content_hash();
    if actual != h.content_hash {
        return Err(Error::format(
            path,
            format!("content hash mismatch: header {} vs data {actual}", h.content_hash),
        ));
    }
    Ok(PreparedFeatures {
        matrix,
        normalizer: h.normalizer,
        split: h.split,
        options: h.options,
        content_hash: h.content_hash,
    })
}
