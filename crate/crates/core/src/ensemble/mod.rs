//! Simplex-constrained least-squares weights for combining base models.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100_000;
const MIN_IMPROVEMENT: f64 = 1e-10;
const MIN_STEP: f64 = 1e-12;

/// Base-model predictions (`n x k`, one column per model) with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    predictions: Array2<f64>,
    targets: Vec<f64>,
    labels: Vec<String>,
}

impl PredictionMatrix {
    pub fn new(predictions: Array2<f64>, targets: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        let (n, k) = predictions.dim();
        if n == 0 || k == 0 {
            return Err(Error::InvalidInput(format!(
                "prediction matrix must be non-empty, got {n} x {k}"
            )));
        }
        if targets.len() != n || labels.len() != k {
            return Err(Error::shape("prediction matrix", (n, k), (targets.len(), labels.len())));
        }
        if predictions.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "prediction matrix contains non-finite values".into(),
            ));
        }
        Ok(Self {
            predictions,
            targets,
            labels,
        })
    }

    /// One column per `(label, predictions)` pair.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>, targets: Vec<f64>) -> Result<Self> {
        let n = targets.len();
        let k = columns.len();
        let mut m = Array2::zeros((n, k));
        let mut labels = Vec::with_capacity(k);
        for (j, (label, col)) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::shape(format!("predictions of {label}"), n, col.len()));
            }
            m.column_mut(j).assign(&ndarray::Array1::from(col));
            labels.push(label);
        }
        Self::new(m, targets, labels)
    }

    pub fn predictions(&self) -> ArrayView2<'_, f64> {
        self.predictions.view()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_models(&self) -> usize {
        self.predictions.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.predictions.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    /// Mean squared error of the weighted prediction on the fitting rows.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `(1/n) sum_i (y_i - sum_j w_j p_ij)^2`, evaluated directly.
pub fn objective(p: &PredictionMatrix, weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for (row, y) in p.predictions.rows().into_iter().zip(&p.targets) {
        let yhat: f64 = row.iter().zip(weights).map(|(a, w)| a * w).sum();
        s += (y - yhat) * (y - yhat);
    }
    s / p.n_rows() as f64
}

/// Euclidean projection onto `{w >= 0, sum w = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Minimizes the ensemble MSE over the probability simplex by projected
/// gradient descent.
///
/// Because the weights sum to one, the objective equals `w' G w` with
/// `G = E'E / n` and `E_ij = p_ij - y_i`; the step is the reciprocal of a
/// bound on the gradient's Lipschitz constant `2 lambda_max(G)`.
pub fn optimize_weights(p: &PredictionMatrix) -> Result<EnsembleWeights> {
    let (n, k) = p.predictions.dim();
    let mut gram = vec![0.0; k * k];
    for (row, y) in p.predictions.rows().into_iter().zip(&p.targets) {
        for a in 0..k {
            let ea = row[a] - y;
            for b in a..k {
                gram[a * k + b] += ea * (row[b] - y);
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            gram[a * k + b] /= n as f64;
            gram[b * k + a] = gram[a * k + b];
        }
    }
    let quad = |w: &[f64]| -> f64 {
        let mut s = 0.0;
        for a in 0..k {
            let ga: f64 = (0..k).map(|b| gram[a * k + b] * w[b]).sum();
            s += w[a] * ga;
        }
        s
    };

    let lipschitz = 2.0 * eigenvalue_bound(&gram, k);
    let mut w = vec![1.0 / k as f64; k];
    let mut f = quad(&w);
    let mut iterations = 0;
    let mut converged = k == 1 || lipschitz <= 0.0;
    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let step: Vec<f64> = (0..k)
            .map(|a| {
                let grad: f64 = 2.0 * (0..k).map(|b| gram[a * k + b] * w[b]).sum::<f64>();
                w[a] - grad / lipschitz
            })
            .collect();
        let next = project_simplex(&step);
        let f_next = quad(&next);
        let moved = w.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let improvement = f - f_next;
        w = next;
        f = f_next;
        converged = improvement < MIN_IMPROVEMENT * f.abs().max(1.0) && moved < MIN_STEP;
    }
    Ok(EnsembleWeights {
        labels: p.labels.clone(),
        objective: objective(p, &w),
        weights: w,
        iterations,
        converged,
    })
}

/// Upper bound on the largest eigenvalue of a symmetric positive
/// semi-definite `k x k` matrix: the smaller of its trace and its largest
/// absolute row sum.
fn eigenvalue_bound(m: &[f64], k: usize) -> f64 {
    let trace: f64 = (0..k).map(|a| m[a * k + a]).sum();
    let gershgorin = (0..k)
        .map(|a| (0..k).map(|b| m[a * k + b].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    trace.min(gershgorin)
}

/// Row-wise convex combination of model predictions.
pub fn ensemble_predict(weights: &[f64], predictions: ArrayView2<f64>) -> Result<Vec<f64>> {
    if weights.len() != predictions.ncols() {
        return Err(Error::shape("ensemble weights", predictions.ncols(), weights.len()));
    }
    Ok(predictions
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(weights).map(|(a, w)| a * w).sum())
        .collect())
}

/// Exhaustive search over simplex points whose coordinates are multiples of
/// `step`, for up to three models.
pub fn grid_oracle(p: &PredictionMatrix, step: f64) -> Result<EnsembleWeights> {
    let k = p.n_models();
    if k > 3 {
        return Err(Error::InvalidInput(format!(
            "grid oracle supports at most 3 models, got {k}"
        )));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidInput(format!("grid step must be in (0, 1], got {step}")));
    }
    let m = (1.0 / step).round() as usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut visited = 0;
    let mut consider = |w: Vec<f64>| {
        visited += 1;
        let f = objective(p, &w);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, w));
        }
    };
    match k {
        1 => consider(vec![1.0]),
        2 => (0..=m).for_each(|i| consider(vec![i as f64 / m as f64, (m - i) as f64 / m as f64])),
        _ => {
            for i in 0..=m {
                for j in 0..=m - i {
                    let l = m - i - j;
                    consider(vec![i as f64 / m as f64, j as f64 / m as f64, l as f64 / m as f64]);
                }
            }
        }
    }
    let (objective, weights) = best.expect("grid is non-empty");
    Ok(EnsembleWeights {
        labels: p.labels.clone(),
        weights,
        objective,
        iterations: visited,
        converged: true,
    })
}
