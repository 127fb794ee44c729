//! LASSO linear baseline fitted by cyclic coordinate descent.

use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json_atomic};

/// Default penalty.
pub const DEFAULT_ALPHA: f64 = 0.0001;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective after each sweep.
    pub objective_path: Vec<f64>,
    /// Content hash of the feature cache the model was fitted on.
    pub feature_hash: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct LassoFile {
    alpha: f64,
    intercept: f64,
    n_features: usize,
    coefficients: Vec<(usize, f64)>,
    sweeps: usize,
    converged: bool,
    #[serde(default)]
    feature_hash: Option<String>,
}

impl LassoModel {
    pub fn n_nonzero(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_atomic(
            path,
            &LassoFile {
                alpha: self.alpha,
                intercept: self.intercept,
                n_features: self.coefficients.len(),
                coefficients: self
                    .coefficients
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(i, c)| (i, *c))
                    .collect(),
                sweeps: self.sweeps,
                converged: self.converged,
                feature_hash: self.feature_hash.clone(),
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: LassoFile = read_json(path)?;
        let mut coefficients = vec![0.0; file.n_features];
        for (i, c) in file.coefficients {
            *coefficients
                .get_mut(i)
                .ok_or_else(|| Error::format(path, format!("coefficient index {i} >= {}", file.n_features)))? = c;
        }
        Ok(Self {
            coefficients,
            intercept: file.intercept,
            alpha: file.alpha,
            sweeps: file.sweeps,
            converged: file.converged,
            objective_path: Vec::new(),
            feature_hash: file.feature_hash,
        })
    }
}

/// `(1/(2n)) ||y - Xw - b||^2 + alpha ||w||_1`
pub fn lasso_objective(x: ArrayView2<f64>, y: &[f64], w: &[f64], b: f64, alpha: f64) -> f64 {
    let n = y.len() as f64;
    let sse: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, yi)| {
            let r = yi - b - row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            r * r
        })
        .sum();
    sse / (2.0 * n) + alpha * w.iter().map(|c| c.abs()).sum::<f64>()
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Minimizes `(1/(2n)) ||y - Xw - b||^2 + alpha ||w||_1` with an unpenalized
/// intercept. Stops when no coefficient (or the intercept) moves by `tol` or
/// more in a sweep.
pub fn lasso_fit(x: ArrayView2<f64>, y: &[f64], alpha: f64, tol: f64, max_iter: usize) -> Result<LassoModel> {
    let (n, p) = x.dim();
    if n < 2 || y.len() != n {
        return Err(Error::InvalidInput(format!(
            "lasso needs at least 2 rows and one target per row, got {n} rows, {} targets",
            y.len()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "alpha must be finite and non-negative, got {alpha}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("lasso input contains non-finite values".into()));
    }
    let nf = n as f64;
    // column-major copy; most columns are sparse one-hot indicators
    let columns: Vec<Vec<(usize, f64)>> = (0..p)
        .map(|j| {
            x.column(j)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect()
        })
        .collect();
    let sq: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|(_, v)| v * v).sum::<f64>() / nf)
        .collect();

    let mut w = vec![0.0; p];
    let mut b = y.iter().sum::<f64>() / nf;
    let mut r: Vec<f64> = y.iter().map(|yi| yi - b).collect();
    let objective = |r: &[f64], w: &[f64]| {
        r.iter().map(|v| v * v).sum::<f64>() / (2.0 * nf) + alpha * w.iter().map(|c| c.abs()).sum::<f64>()
    };
    let mut path = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if sq[j] == 0.0 {
                continue;
            }
            let col = &columns[j];
            let rho = col.iter().map(|&(i, v)| v * r[i]).sum::<f64>() / nf + sq[j] * w[j];
            let new = soft_threshold(rho, alpha) / sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for &(i, v) in col {
                    r[i] -= v * delta;
                }
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let shift = r.iter().sum::<f64>() / nf;
        if shift != 0.0 {
            b += shift;
            r.iter_mut().for_each(|v| *v -= shift);
            max_change = max_change.max(shift.abs());
        }
        path.push(objective(&r, &w));
        if max_change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("lasso did not converge in {max_iter} sweeps (alpha {alpha})");
    }
    Ok(LassoModel {
        coefficients: w,
        intercept: b,
        alpha,
        sweeps,
        converged,
        objective_path: path,
        feature_hash: None,
    })
}

/// `Xw + b` for every row.
pub fn lasso_predict(model: &LassoModel, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.coefficients.len() {
        return Err(Error::shape("lasso_predict", model.coefficients.len(), x.ncols()));
    }
    Ok(x.rows()
        .into_iter()
        .map(|row| model.intercept + row.iter().zip(&model.coefficients).map(|(a, c)| a * c).sum::<f64>())
        .collect())
}
