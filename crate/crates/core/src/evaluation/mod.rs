//! Regression metrics and per-state prediction-error reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::preprocess::RowKey;

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::shape("metric inputs", y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("metrics need at least one observation".into()));
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Pearson correlation; an error when either vector is constant.
pub fn pearson_r(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mp = yhat.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mp);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidInput(
            "correlation is undefined for a constant vector".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `|actual - predicted| / |actual| * 100`, or `None` when `actual` is zero.
pub fn prediction_error_percentage(actual: f64, predicted: f64) -> Option<f64> {
    (actual != 0.0).then(|| (actual - predicted).abs() / actual.abs() * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub model: String,
    pub split: String,
    pub rmse: f64,
    pub mae: f64,
    pub r: f64,
    pub n: usize,
}

impl Metrics {
    pub fn compute(model: impl Into<String>, split: impl Into<String>, y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(Self {
            model: model.into(),
            split: split.into(),
            rmse: rmse(y, yhat)?,
            mae: mae(y, yhat)?,
            r: pearson_r(y, yhat)?,
            n: y.len(),
        })
    }
}

pub fn metrics_csv(rows: &[Metrics]) -> String {
    let mut out = String::from("model,split,rmse,mae,r,n\n");
    for m in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{}\n",
            m.model, m.split, m.rmse, m.mae, m.r, m.n
        ));
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[Metrics]) -> Result<()> {
    write_atomic(path, metrics_csv(rows).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateError {
    pub state: String,
    pub mean_error_pct: f64,
    pub n_locations: usize,
    pub n_obs: usize,
    pub mean_observed_yield: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionErrorReport {
    pub states: Vec<StateError>,
    /// Rows skipped because the observed yield was zero.
    pub excluded_zero_yield: usize,
    /// States left with no rows after the exclusion.
    pub omitted_states: Vec<String>,
}

impl RegionErrorReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,mean_error_pct,n_locations,n_obs,mean_observed_yield\n");
        for s in &self.states {
            out.push_str(&format!(
                "{},{:.6},{},{},{:.6}\n",
                s.state, s.mean_error_pct, s.n_locations, s.n_obs, s.mean_observed_yield
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Averages percentage errors per location, then averages the location
/// means within each state.
pub fn aggregate_by_region(rows: &[RowKey], actual: &[f64], predicted: &[f64]) -> Result<RegionErrorReport> {
    check_pair(actual, predicted)?;
    if rows.len() != actual.len() {
        return Err(Error::shape("region rows", actual.len(), rows.len()));
    }
    #[derive(Default)]
    struct Acc {
        err_sum: f64,
        count: usize,
        yield_sum: f64,
    }
    let mut by_state: BTreeMap<&str, BTreeMap<&str, Acc>> = BTreeMap::new();
    let mut report = RegionErrorReport::default();
    for ((row, &a), &p) in rows.iter().zip(actual).zip(predicted) {
        let locations = by_state.entry(&row.state).or_default();
        match prediction_error_percentage(a, p) {
            Some(e) => {
                let acc = locations.entry(&row.location_id).or_default();
                acc.err_sum += e;
                acc.count += 1;
                acc.yield_sum += a;
            }
            None => report.excluded_zero_yield += 1,
        }
    }
    for (state, locations) in by_state {
        if locations.is_empty() {
            report.omitted_states.push(state.to_string());
            continue;
        }
        let n_locations = locations.len();
        let n_obs: usize = locations.values().map(|a| a.count).sum();
        let mean_error_pct = locations.values().map(|a| a.err_sum / a.count as f64).sum::<f64>() / n_locations as f64;
        let mean_observed_yield = locations.values().map(|a| a.yield_sum).sum::<f64>() / n_obs as f64;
        report.states.push(StateError {
            state: state.to_string(),
            mean_error_pct,
            n_locations,
            n_obs,
            mean_observed_yield,
        });
    }
    if !report.omitted_states.is_empty() {
        log::info!(
            "states with no nonzero-yield rows omitted from the region report: {}",
            report.omitted_states.join(", ")
        );
    }
    Ok(report)
}
