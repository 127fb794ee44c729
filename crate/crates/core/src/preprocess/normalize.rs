use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column z-score statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    /// Column indices, in the matrix the normalizer was fitted on, that it transforms.
    pub columns: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Positions (into `columns`) whose standard deviation was zero; they map to 0.
    pub degenerate: Vec<usize>,
}

impl Normalizer {
    /// Fits on `rows` x `columns` of `data`.
    pub fn fit_columns(data: ArrayView2<f64>, rows: &[usize], columns: &[usize]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "z-score fit needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let n = rows.len() as f64;
        let mut mean = Vec::with_capacity(columns.len());
        let mut std = Vec::with_capacity(columns.len());
        let mut degenerate = Vec::new();
        for (k, &c) in columns.iter().enumerate() {
            if c >= data.ncols() {
                return Err(Error::InvalidInput(format!("column {c} out of range")));
            }
            let m = rows.iter().map(|&r| data[[r, c]]).sum::<f64>() / n;
            let var = rows.iter().map(|&r| (data[[r, c]] - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if !m.is_finite() || !s.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite values in column {c}")));
            }
            if s <= 1e-12 * (1.0 + m.abs()) {
                degenerate.push(k);
                log::warn!("column {c} is constant over the fit rows; it will be mapped to zeros");
            }
            mean.push(m);
            std.push(s);
        }
        Ok(Self {
            columns: columns.to_vec(),
            mean,
            std,
            degenerate,
        })
    }

    /// Rescales the normalizer's columns of `data` in place.
    pub fn apply_in_place(&self, data: &mut Array2<f64>) -> Result<()> {
        if let Some(&c) = self.columns.iter().find(|&&c| c >= data.ncols()) {
            return Err(Error::InvalidInput(format!(
                "normalizer column {c} out of range for a {}-column matrix",
                data.ncols()
            )));
        }
        let mut is_degenerate = vec![false; self.columns.len()];
        for &k in &self.degenerate {
            is_degenerate[k] = true;
        }
        for (k, &c) in self.columns.iter().enumerate() {
            let mut col = data.column_mut(c);
            if is_degenerate[k] {
                col.fill(0.0);
            } else {
                let (m, s) = (self.mean[k], self.std[k]);
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        Ok(())
    }
}

/// Fits over every column of `data`.
pub fn zscore_fit(data: ArrayView2<f64>) -> Result<Normalizer> {
    let rows: Vec<usize> = (0..data.nrows()).collect();
    let cols: Vec<usize> = (0..data.ncols()).collect();
    Normalizer::fit_columns(data, &rows, &cols)
}

pub fn zscore_apply(normalizer: &Normalizer, data: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut out = data.to_owned();
    normalizer.apply_in_place(&mut out)?;
    Ok(out)
}
