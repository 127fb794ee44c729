use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::network::{check_manifest, Network};
use crate::error::{Error, Result};
use crate::io::{derive_seed, write_atomic};
use crate::nn::{mse_loss, Adam, Graph, Mode, Tensor};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    /// Mean minibatch loss since the previous entry; at step 0, the
    /// inference-mode MSE over all training rows.
    pub train_loss: f64,
    pub val_rmse: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub entries: Vec<HistoryEntry>,
    pub best_step: usize,
    pub best_val_rmse: f64,
}

impl TrainingHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,train_loss,val_rmse\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:?},{:?}\n", e.step, e.train_loss, e.val_rmse));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

fn rmse_of(network: &Network, matrix: &FeatureMatrix, rows: &[usize]) -> Result<f64> {
    let preds = network.predict_rows(matrix.values.view(), rows)?;
    let targets: Vec<f64> = rows.iter().map(|&r| matrix.targets[r]).collect();
    Ok(mse_loss(&preds, &targets)?.0.sqrt())
}

/// Minibatch Adam on `train_rows`, validating every `log_interval` steps and
/// returning the snapshot with the lowest validation RMSE.
///
/// The output bias starts at the mean training target.
pub fn train(
    mut network: Network,
    matrix: &FeatureMatrix,
    train_rows: &[usize],
    val_rows: &[usize],
    config: &TrainConfig,
) -> Result<(Network, TrainingHistory)> {
    config.validate()?;
    check_manifest(network.manifest(), &matrix.manifest)?;
    if train_rows.is_empty() || val_rows.is_empty() {
        return Err(Error::InvalidInput(
            "training and validation rows must be nonempty".into(),
        ));
    }
    if let Some(&r) = train_rows.iter().chain(val_rows).find(|&&r| r >= matrix.n_rows()) {
        return Err(Error::InvalidInput(format!(
            "row {r} out of range for {} rows",
            matrix.n_rows()
        )));
    }

    let mean = train_rows.iter().map(|&r| matrix.targets[r]).sum::<f64>() / train_rows.len() as f64;
    let bias = network.output_bias();
    network.params_mut().get_mut(bias).data_mut()[0] = mean;

    let mut adam = Adam::new(network.params(), config.adam, config.schedule);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order = train_rows.to_vec();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let batch_size = config.batch_size.min(order.len());

    let initial_train = rmse_of(&network, matrix, train_rows)?.powi(2);
    let initial_val = rmse_of(&network, matrix, val_rows)?;
    let mut history = TrainingHistory {
        entries: vec![HistoryEntry {
            step: 0,
            train_loss: initial_train,
            val_rmse: initial_val,
        }],
        best_step: 0,
        best_val_rmse: initial_val,
    };
    let mut best = network.params().clone();
    let mut interval_loss = 0.0;
    let mut interval_steps = 0;

    for step in 1..=config.iterations {
        if cursor + batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let batch = &order[cursor..cursor + batch_size];
        cursor += batch_size;

        let (others, weather) = network.layout().batch(matrix.values.view(), batch);
        let targets: Vec<f64> = batch.iter().map(|&r| matrix.targets[r]).collect();
        let grads = {
            let mut g = Graph::new(network.params(), Mode::Train, derive_seed(config.seed, &[step as u64]));
            let out = network.forward(&mut g, others, weather)?;
            let (loss, grad) = mse_loss(g.value(out).data(), &targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step, loss });
            }
            interval_loss += loss;
            interval_steps += 1;
            g.backward(out, Tensor::new(vec![batch_size, 1], grad)?)?
                .into_param_grads(network.params())
        };
        adam.step(network.params_mut(), &grads)?;

        if step % config.log_interval == 0 || step == config.iterations {
            let val_rmse = rmse_of(&network, matrix, val_rows)?;
            let train_loss = interval_loss / interval_steps as f64;
            history.entries.push(HistoryEntry {
                step,
                train_loss,
                val_rmse,
            });
            debug!("step {step}: train loss {train_loss:.6}, val rmse {val_rmse:.6}");
            if val_rmse < history.best_val_rmse {
                history.best_val_rmse = val_rmse;
                history.best_step = step;
                best = network.params().clone();
            }
            interval_loss = 0.0;
            interval_steps = 0;
        }
    }
    info!(
        "trained {} for {} steps; best validation RMSE {:.4} at step {}",
        network.kind(),
        config.iterations,
        history.best_val_rmse,
        history.best_step
    );
    *network.params_mut() = best;
    Ok((network, history))
}
