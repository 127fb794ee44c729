use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::records::PerformanceRecord;
use super::weather::{WeatherTable, WeatherVariable};
use crate::error::{Error, Result};

/// Sorted category lists covering every value present in a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub locations: Vec<String>,
    pub years: Vec<i32>,
    pub genotypes: Vec<String>,
    pub maturity_groups: Vec<String>,
    pub states: Vec<String>,
}

impl Vocabularies {
    pub fn from_records(records: &[PerformanceRecord]) -> Self {
        let mut loc = BTreeSet::new();
        let mut years = BTreeSet::new();
        let mut gen = BTreeSet::new();
        let mut mg = BTreeSet::new();
        let mut states = BTreeSet::new();
        for r in records {
            loc.insert(r.location_id.clone());
            years.insert(r.year);
            gen.insert(r.genotype_id.clone());
            if let Some(m) = &r.maturity_group {
                mg.insert(m.clone());
            }
            states.insert(r.state.clone());
        }
        Self {
            locations: loc.into_iter().collect(),
            years: years.into_iter().collect(),
            genotypes: gen.into_iter().collect(),
            maturity_groups: mg.into_iter().collect(),
            states: states.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DanglingRecord,
    TemperatureOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub severity: Severity,
    /// Record row (1-based) or weather key, depending on `kind`.
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_message(&self) -> String {
        self.violations.first().map(|v| v.message.clone()).unwrap_or_default()
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for v in &self.violations {
            s.push_str(&serde_json::to_string(v).expect("violation serializes"));
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{:?} {:?} [{}]: {}", v.severity, v.kind, v.key, v.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Dangling records are dropped and temperature-order breaches kept, both reported.
    #[default]
    Lenient,
    /// Any violation fails the join.
    Strict,
}

/// Records joined to their weather, with vocabularies frozen over the retained records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedDataset {
    pub records: Vec<PerformanceRecord>,
    #[serde(with = "weather_list")]
    pub weather: WeatherTable,
    pub vocab: Vocabularies,
}

impl JoinedDataset {
    pub fn weather_for(&self, record: &PerformanceRecord) -> &super::WeatherSeries {
        &self.weather[&(record.location_id.clone(), record.year)]
    }
}

pub fn join_and_validate(
    records: Vec<PerformanceRecord>,
    weather: WeatherTable,
    mode: ValidationMode,
) -> Result<(JoinedDataset, ValidationReport)> {
    let mut report = ValidationReport::default();
    let severity = match mode {
        ValidationMode::Lenient => Severity::Warning,
        ValidationMode::Strict => Severity::Error,
    };

    let mut kept = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        if weather.contains_key(&(r.location_id.clone(), r.year)) {
            kept.push(r);
        } else {
            report.violations.push(Violation {
                kind: ViolationKind::DanglingRecord,
                severity,
                key: (i + 1).to_string(),
                message: format!(
                    "record {} (location {}, year {}, genotype {}) has no weather series",
                    i + 1,
                    r.location_id,
                    r.year,
                    r.genotype_id
                ),
            });
        }
    }

    for series in weather.values() {
        let min = series.variable(WeatherVariable::MinSur);
        let avg = series.variable(WeatherVariable::AvgSur);
        let max = series.variable(WeatherVariable::MaxSur);
        let bad: Vec<usize> = (0..min.len())
            .filter(|&d| !(min[d] <= avg[d] && avg[d] <= max[d]))
            .collect();
        if let Some(&first) = bad.first() {
            report.violations.push(Violation {
                kind: ViolationKind::TemperatureOrder,
                severity,
                key: format!("{}/{}", series.location_id, series.year),
                message: format!(
                    "weather {}/{}: MinSur <= AvgSur <= MaxSur violated on day {} ({} day(s) total)",
                    series.location_id,
                    series.year,
                    first + 1,
                    bad.len()
                ),
            });
        }
    }

    if mode == ValidationMode::Strict && !report.is_empty() {
        return Err(Error::Validation(Box::new(report)));
    }
    for v in &report.violations {
        log::warn!("{}", v.message);
    }
    let vocab = Vocabularies::from_records(&kept);
    Ok((
        JoinedDataset {
            records: kept,
            weather,
            vocab,
        },
        report,
    ))
}

/// Serializes a weather table as a list of series (JSON maps need string keys).
mod weather_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::dataset::{WeatherSeries, WeatherTable};

    pub fn serialize<S: Serializer>(table: &WeatherTable, s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<&WeatherSeries> = table.values().collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<WeatherTable, D::Error> {
        let list = Vec::<WeatherSeries>::deserialize(d)?;
        let mut table = WeatherTable::new();
        for series in list {
            if table.insert(series.key(), series).is_some() {
                return Err(serde::de::Error::custom("duplicate weather series"));
            }
        }
        Ok(table)
    }
}
