use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::YieldModel;
use crate::dataset::WeatherVariable;
use crate::error::{Error, Result};
use crate::evaluation::rmse;
use crate::io::{derive_seed, write_atomic};
use crate::preprocess::FeatureMatrix;

const PERIOD_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    pub group: String,
    /// Mean over repetitions of shuffled RMSE minus the baseline.
    pub rmse_change: f64,
    pub changes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub model: String,
    pub baseline_rmse: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub groups: Vec<GroupImportance>,
}

impl ImportanceReport {
    pub fn get(&self, group: &str) -> Option<&GroupImportance> {
        self.groups.iter().find(|g| g.group == group)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,rmse_change,baseline_rmse,repetitions\n");
        for g in &self.groups {
            out.push_str(&format!(
                "{},{:.6},{:.6},{}\n",
                g.group, g.rmse_change, self.baseline_rmse, self.repetitions
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodChange {
    pub period: usize,
    pub approx_week: usize,
    pub rmse_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodImportance {
    pub model: String,
    pub variable: WeatherVariable,
    pub baseline_rmse: f64,
    pub periods: Vec<PeriodChange>,
}

impl PeriodImportance {
    /// Period with the largest RMSE change (earliest on ties).
    pub fn peak(&self) -> Option<usize> {
        self.periods
            .iter()
            .fold(None, |best: Option<&PeriodChange>, p| match best {
                Some(b) if b.rmse_change >= p.rmse_change => Some(b),
                _ => Some(p),
            })
            .map(|p| p.period)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,period,approx_week,rmse_change\n");
        for p in &self.periods {
            out.push_str(&format!(
                "{},{},{},{:.6}\n",
                self.variable.name(),
                p.period,
                p.approx_week,
                p.rmse_change
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Week of the season a 4-day period falls in: `ceil(4 p / 7)`.
pub fn approx_week(period: usize) -> usize {
    (4 * period).div_ceil(7)
}

/// A seeded row permutation, never the identity when `n > 1`.
fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if n < 2 || perm.iter().enumerate().any(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// RMSE after moving the values of `columns` from row `perm[i]` to row `i`.
fn shuffled_rmse(model: &dyn YieldModel, matrix: &FeatureMatrix, columns: &[usize], perm: &[usize]) -> Result<f64> {
    let mut shuffled = matrix.clone();
    for (i, &src) in perm.iter().enumerate() {
        for &c in columns {
            shuffled.values[[i, c]] = matrix.values[[src, c]];
        }
    }
    rmse(&matrix.targets, &model.predict(&shuffled)?)
}

fn check(model: &dyn YieldModel, matrix: &FeatureMatrix, repetitions: usize) -> Result<f64> {
    if repetitions == 0 {
        return Err(Error::InvalidInput("repetitions must be at least 1".into()));
    }
    if model.manifest() != &matrix.manifest {
        return Err(Error::ManifestMismatch(
            "model and importance data use different column layouts".into(),
        ));
    }
    rmse(&matrix.targets, &model.predict(matrix)?)
}

/// RMSE change when each group's columns are shuffled jointly across rows.
///
/// Every repetition draws its permutation from `(seed, group, repetition)`,
/// so fewer repetitions give a prefix of the same draws.
pub fn permutation_importance(
    model: &dyn YieldModel,
    matrix: &FeatureMatrix,
    groups: &[&str],
    repetitions: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let baseline = check(model, matrix, repetitions)?;
    let mut out = Vec::with_capacity(groups.len());
    for &name in groups {
        let (gi, group) = matrix
            .manifest
            .groups
            .iter()
            .enumerate()
            .find(|(_, g)| g.name == name)
            .ok_or_else(|| Error::UnknownGroup(name.to_string()))?;
        let columns: Vec<usize> = group.columns().collect();
        let changes = (0..repetitions)
            .map(|rep| {
                let perm = permutation(matrix.n_rows(), derive_seed(seed, &[gi as u64, rep as u64]));
                Ok(shuffled_rmse(model, matrix, &columns, &perm)? - baseline)
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(GroupImportance {
            group: name.to_string(),
            rmse_change: changes.iter().sum::<f64>() / repetitions as f64,
            changes,
        });
    }
    Ok(ImportanceReport {
        model: model.describe(),
        baseline_rmse: baseline,
        repetitions,
        seed,
        groups: out,
    })
}

/// RMSE change when a single weather column (one variable, one period) is
/// shuffled, for every period of `variable`.
pub fn per_period_importance(
    model: &dyn YieldModel,
    matrix: &FeatureMatrix,
    variable: WeatherVariable,
    repetitions: usize,
    seed: u64,
) -> Result<PeriodImportance> {
    let baseline = check(model, matrix, repetitions)?;
    let group = matrix
        .manifest
        .weather_group(variable)
        .ok_or_else(|| Error::UnknownGroup(variable.name().to_string()))?;
    let mut periods = Vec::with_capacity(group.len);
    for (offset, column) in group.columns().enumerate() {
        let period = offset + 1;
        let mut total = 0.0;
        for rep in 0..repetitions {
            let s = derive_seed(
                seed,
                &[PERIOD_STREAM + variable.index() as u64, period as u64, rep as u64],
            );
            let perm = permutation(matrix.n_rows(), s);
            total += shuffled_rmse(model, matrix, &[column], &perm)? - baseline;
        }
        periods.push(PeriodChange {
            period,
            approx_week: approx_week(period),
            rmse_change: total / repetitions as f64,
        });
    }
    Ok(PeriodImportance {
        model: model.describe(),
        variable,
        baseline_rmse: baseline,
        periods,
    })
}
