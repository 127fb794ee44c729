use crate::error::{Error, Result};

/// Mean squared error and its gradient `2 (pred - target) / n`.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predictions.len() != targets.len() {
        return Err(Error::shape("mse_loss", targets.len(), predictions.len()));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidInput("mse_loss on an empty batch".into()));
    }
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let r = p - t;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    Ok((loss / n, grad))
}
