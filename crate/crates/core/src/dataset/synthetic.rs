use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::join::{JoinedDataset, Vocabularies};
use super::records::PerformanceRecord;
use super::weather::{WeatherSeries, WeatherTable, WeatherVariable, SEASON_DAYS};
use crate::error::{Error, Result};
use crate::preprocess::DownsamplePolicy;

/// One additive component of a synthetic yield function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum SignalTerm {
    /// `coefficient * mean(variable over all 214 days)`
    WeatherMean {
        variable: WeatherVariable,
        coefficient: f64,
    },
    /// `coefficient * mean(variable over the days of 4-day period `period`)`, 1-based.
    WeatherPeriod {
        variable: WeatherVariable,
        period: usize,
        coefficient: f64,
    },
    /// `coefficient * (period mean - center)^2`
    WeatherPeriodSquared {
        variable: WeatherVariable,
        period: usize,
        coefficient: f64,
        center: f64,
    },
    /// Per-category effects drawn from N(0, scale^2).
    Location {
        scale: f64,
    },
    Year {
        scale: f64,
    },
    Genotype {
        scale: f64,
    },
    MaturityGroup {
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub locations: usize,
    pub years: usize,
    pub genotypes: usize,
    pub maturity_groups: usize,
    pub states: usize,
    pub first_year: i32,
    /// `None` plants every genotype at every location-year.
    pub genotypes_per_site: Option<usize>,
    pub intercept: f64,
    pub signal: Vec<SignalTerm>,
    pub noise_sd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            locations: 5,
            years: 3,
            genotypes: 10,
            maturity_groups: 2,
            states: 2,
            first_year: 2003,
            genotypes_per_site: None,
            intercept: 40.0,
            signal: vec![SignalTerm::WeatherMean {
                variable: WeatherVariable::Ap,
                coefficient: 2.0,
            }],
            noise_sd: 0.0,
        }
    }
}

/// A resolved ground-truth term with every random effect written out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum TruthTerm {
    Weather(SignalTerm),
    Categorical {
        group: String,
        effects: BTreeMap<String, f64>,
    },
}

/// The exact function that produced the synthetic yields (before noise).
///
/// Yields are `max(0, intercept + sum of terms) + noise`, then clamped at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub intercept: f64,
    pub terms: Vec<TruthTerm>,
    pub noise_sd: f64,
}

impl GroundTruth {
    pub fn evaluate(&self, record: &PerformanceRecord, weather: &WeatherSeries) -> f64 {
        let mut y = self.intercept;
        for term in &self.terms {
            y += match term {
                TruthTerm::Weather(SignalTerm::WeatherMean { variable, coefficient }) => {
                    let v = weather.variable(*variable);
                    coefficient * v.iter().sum::<f64>() / v.len() as f64
                }
                TruthTerm::Weather(SignalTerm::WeatherPeriod {
                    variable,
                    period,
                    coefficient,
                }) => coefficient * period_mean(weather, *variable, *period),
                TruthTerm::Weather(SignalTerm::WeatherPeriodSquared {
                    variable,
                    period,
                    coefficient,
                    center,
                }) => {
                    let d = period_mean(weather, *variable, *period) - center;
                    coefficient * d * d
                }
                TruthTerm::Weather(_) => 0.0,
                TruthTerm::Categorical { group, effects } => {
                    let key = match group.as_str() {
                        "location" => record.location_id.clone(),
                        "year" => record.year.to_string(),
                        "genotype" => record.genotype_id.clone(),
                        _ => record.maturity_group.clone().unwrap_or_default(),
                    };
                    effects.get(&key).copied().unwrap_or(0.0)
                }
            };
        }
        y.max(0.0)
    }
}

fn period_mean(weather: &WeatherSeries, variable: WeatherVariable, period: usize) -> f64 {
    let (start, end) = DownsamplePolicy::TailWindow.window(period - 1);
    let days = &weather.variable(variable)[start..end];
    days.iter().sum::<f64>() / days.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub dataset: JoinedDataset,
    pub truth: GroundTruth,
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<SyntheticDataset> {
    for (name, n) in [
        ("locations", config.locations),
        ("years", config.years),
        ("genotypes", config.genotypes),
        ("maturity_groups", config.maturity_groups),
        ("states", config.states),
    ] {
        if n == 0 {
            return Err(Error::Config(format!("synthetic {name} must be positive")));
        }
    }
    if let Some(m) = config.genotypes_per_site {
        if m == 0 || m > config.genotypes {
            return Err(Error::Config(format!(
                "genotypes_per_site must be in 1..={}, got {m}",
                config.genotypes
            )));
        }
    }
    if config.noise_sd.is_nan() || config.noise_sd < 0.0 {
        return Err(Error::Config("noise_sd must be non-negative".into()));
    }
    for term in &config.signal {
        if let SignalTerm::WeatherPeriod { period, .. } | SignalTerm::WeatherPeriodSquared { period, .. } = term {
            if !(1..=crate::preprocess::PERIODS).contains(period) {
                return Err(Error::Config(format!("signal period {period} outside 1..=53")));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locations: Vec<String> = (0..config.locations).map(|i| format!("L{:03}", i + 1)).collect();
    let years: Vec<i32> = (0..config.years as i32).map(|i| config.first_year + i).collect();
    let genotypes: Vec<String> = (0..config.genotypes).map(|i| format!("G{:04}", i + 1)).collect();
    let mgs: Vec<String> = (0..config.maturity_groups).map(|i| format!("MG{i}")).collect();
    let states: Vec<String> = (0..config.states).map(|i| format!("S{:02}", i + 1)).collect();

    let weather = generate_weather(&locations, &years, &mut rng);

    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let effects = |names: Vec<String>, scale: f64, rng: &mut ChaCha8Rng| -> BTreeMap<String, f64> {
        names.into_iter().map(|n| (n, scale * std_normal.sample(rng))).collect()
    };
    let terms: Vec<TruthTerm> = config
        .signal
        .iter()
        .map(|t| match t {
            SignalTerm::Location { scale } => TruthTerm::Categorical {
                group: "location".into(),
                effects: effects(locations.clone(), *scale, &mut rng),
            },
            SignalTerm::Year { scale } => TruthTerm::Categorical {
                group: "year".into(),
                effects: effects(years.iter().map(|y| y.to_string()).collect(), *scale, &mut rng),
            },
            SignalTerm::Genotype { scale } => TruthTerm::Categorical {
                group: "genotype".into(),
                effects: effects(genotypes.clone(), *scale, &mut rng),
            },
            SignalTerm::MaturityGroup { scale } => TruthTerm::Categorical {
                group: "MG".into(),
                effects: effects(mgs.clone(), *scale, &mut rng),
            },
            weather_term => TruthTerm::Weather(weather_term.clone()),
        })
        .collect();
    let truth = GroundTruth {
        intercept: config.intercept,
        terms,
        noise_sd: config.noise_sd,
    };

    let mut records = Vec::new();
    for (li, loc) in locations.iter().enumerate() {
        for &year in &years {
            let planted: Vec<usize> = match config.genotypes_per_site {
                None => (0..config.genotypes).collect(),
                Some(m) => {
                    let mut idx = sample(&mut rng, config.genotypes, m).into_vec();
                    idx.sort_unstable();
                    idx
                }
            };
            let series = &weather[&(loc.clone(), year)];
            for g in planted {
                let mut r = PerformanceRecord {
                    location_id: loc.clone(),
                    year,
                    genotype_id: genotypes[g].clone(),
                    maturity_group: Some(mgs[g % mgs.len()].clone()),
                    state: states[li % states.len()].clone(),
                    yield_value: 0.0,
                    genotype_cluster: None,
                };
                let mut y = truth.evaluate(&r, series);
                if config.noise_sd > 0.0 {
                    y = (y + config.noise_sd * std_normal.sample(&mut rng)).max(0.0);
                }
                r.yield_value = y;
                records.push(r);
            }
        }
    }

    let vocab = Vocabularies::from_records(&records);
    Ok(SyntheticDataset {
        dataset: JoinedDataset {
            records,
            weather,
            vocab,
        },
        truth,
    })
}

/// Smooth seasonal curves plus site/year offsets and independent daily noise.
/// Daily noise is i.i.d., so distinct 4-day periods are uncorrelated after
/// removing the shared seasonal shape.
fn generate_weather(locations: &[String], years: &[i32], rng: &mut ChaCha8Rng) -> WeatherTable {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut table = WeatherTable::new();
    for loc in locations {
        let site: [f64; 7] = std::array::from_fn(|_| n.sample(rng));
        for &year in years {
            let mut values = vec![0.0; WeatherVariable::COUNT * SEASON_DAYS];
            let yr: [f64; 7] = std::array::from_fn(|_| n.sample(rng));
            for d in 0..SEASON_DAYS {
                let season = (std::f64::consts::PI * d as f64 / (SEASON_DAYS - 1) as f64).sin();
                let mut set = |v: WeatherVariable, x: f64| {
                    values[v.index() * SEASON_DAYS + d] = x;
                };
                let adni = 180.0 + 60.0 * season + 15.0 * site[0] + 8.0 * yr[0] + 25.0 * n.sample(rng);
                set(WeatherVariable::Adni, adni.max(0.0));
                let ap = 2.5 + 1.0 * season + 0.5 * site[1] + 0.4 * yr[1] + 2.0 * n.sample(rng);
                set(WeatherVariable::Ap, ap.max(0.0));
                let arh = 70.0 + 5.0 * season + 4.0 * site[2] + 2.0 * yr[2] + 6.0 * n.sample(rng);
                set(WeatherVariable::Arh, arh.clamp(0.0, 100.0));
                let mdni = 550.0 + 150.0 * season + 30.0 * site[3] + 15.0 * yr[3] + 60.0 * n.sample(rng);
                set(WeatherVariable::Mdni, mdni.max(0.0));
                let avg = 12.0 + 12.0 * season + 2.0 * site[4] + 1.0 * yr[4] + 2.5 * n.sample(rng);
                let spread_hi = 3.0 + 5.0 * rng.random::<f64>();
                let spread_lo = 3.0 + 5.0 * rng.random::<f64>();
                set(WeatherVariable::AvgSur, avg);
                set(WeatherVariable::MaxSur, avg + spread_hi);
                set(WeatherVariable::MinSur, avg - spread_lo);
            }
            let series = WeatherSeries::new(loc.clone(), year, values).expect("generated series is complete");
            table.insert(series.key(), series);
        }
    }
    table
}
