use serde::{Deserialize, Serialize};

use crate::dataset::SEASON_DAYS;
use crate::error::{Error, Result};

/// Aggregated periods per weather variable.
pub const PERIODS: usize = 53;

/// How the 214 season days are grouped into 53 periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DownsamplePolicy {
    /// 52 four-day windows (days 1-208) and a final six-day window (days 209-214).
    #[default]
    TailWindow,
    /// 53 four-day windows over days 1-212; days 213-214 are dropped.
    Truncate,
}

impl DownsamplePolicy {
    /// Half-open 0-based day range `[start, end)` of period `p` (0-based).
    pub fn window(self, p: usize) -> (usize, usize) {
        assert!(p < PERIODS, "period index {p} out of range");
        match self {
            DownsamplePolicy::TailWindow if p == PERIODS - 1 => (4 * p, SEASON_DAYS),
            _ => (4 * p, 4 * p + 4),
        }
    }
}

/// Averages a 214-day series into 53 period means.
pub fn downsample_weather(series: &[f64], policy: DownsamplePolicy) -> Result<Vec<f64>> {
    if series.len() != SEASON_DAYS {
        return Err(Error::InvalidInput(format!(
            "downsampling expects {SEASON_DAYS} daily values, got {}",
            series.len()
        )));
    }
    Ok((0..PERIODS)
        .map(|p| {
            let (s, e) = policy.window(p);
            series[s..e].iter().sum::<f64>() / (e - s) as f64
        })
        .collect())
}
