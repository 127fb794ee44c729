use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Days in the recorded growing season (April 1 to October 31).
pub const SEASON_DAYS: usize = 214;

/// The seven daily weather variables, in canonical row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeatherVariable {
    #[serde(rename = "ADNI")]
    Adni,
    #[serde(rename = "AP")]
    Ap,
    #[serde(rename = "ARH")]
    Arh,
    #[serde(rename = "MDNI")]
    Mdni,
    #[serde(rename = "MaxSur")]
    MaxSur,
    #[serde(rename = "MinSur")]
    MinSur,
    #[serde(rename = "AvgSur")]
    AvgSur,
}

impl WeatherVariable {
    pub const ALL: [WeatherVariable; 7] = [
        WeatherVariable::Adni,
        WeatherVariable::Ap,
        WeatherVariable::Arh,
        WeatherVariable::Mdni,
        WeatherVariable::MaxSur,
        WeatherVariable::MinSur,
        WeatherVariable::AvgSur,
    ];

    pub const COUNT: usize = 7;

    pub fn name(self) -> &'static str {
        match self {
            WeatherVariable::Adni => "ADNI",
            WeatherVariable::Ap => "AP",
            WeatherVariable::Arh => "ARH",
            WeatherVariable::Mdni => "MDNI",
            WeatherVariable::MaxSur => "MaxSur",
            WeatherVariable::MinSur => "MinSur",
            WeatherVariable::AvgSur => "AvgSur",
        }
    }

    /// Row position in a [`WeatherSeries`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for WeatherVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeatherVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeatherVariable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownVariable(s.to_string()))
    }
}

/// Daily weather for one (location, year): 7 rows x 214 days, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub location_id: String,
    pub year: i32,
    values: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(location_id: impl Into<String>, year: i32, values: Vec<f64>) -> Result<Self> {
        let location_id = location_id.into();
        if values.len() != WeatherVariable::COUNT * SEASON_DAYS {
            return Err(Error::InvalidInput(format!(
                "weather {location_id}/{year}: expected {} values, got {}",
                WeatherVariable::COUNT * SEASON_DAYS,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "weather {location_id}/{year}: non-finite value for {} day {}",
                WeatherVariable::ALL[i / SEASON_DAYS],
                i % SEASON_DAYS + 1
            )));
        }
        Ok(Self {
            location_id,
            year,
            values,
        })
    }

    pub fn key(&self) -> WeatherKey {
        (self.location_id.clone(), self.year)
    }

    pub fn variable(&self, var: WeatherVariable) -> &[f64] {
        let start = var.index() * SEASON_DAYS;
        &self.values[start..start + SEASON_DAYS]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub type WeatherKey = (String, i32);
pub type WeatherTable = BTreeMap<WeatherKey, WeatherSeries>;

fn key_label(key: &WeatherKey) -> String {
    format!("{}/{}", key.0, key.1)
}

/// Loads a long-form weather CSV (`location_id,year,variable,day,value`).
pub fn load_weather(path: &Path) -> Result<WeatherTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let (c_loc, c_year, c_var, c_day, c_val) = (
        col("location_id")?,
        col("year")?,
        col("variable")?,
        col("day")?,
        col("value")?,
    );

    // Per key: one Option per (variable, day) so gaps and repeats are both detectable.
    let mut partial: BTreeMap<WeatherKey, Vec<Option<f64>>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message,
        };
        let location = field(c_loc).to_string();
        if location.is_empty() {
            return Err(parse_err("location_id", "empty identifier".into()));
        }
        let year: i32 = field(c_year)
            .parse()
            .map_err(|_| parse_err("year", format!("cannot parse `{}` as a year", field(c_year))))?;
        let var: WeatherVariable = field(c_var).parse()?;
        let day: usize = field(c_day)
            .parse()
            .map_err(|_| parse_err("day", format!("cannot parse `{}` as a day", field(c_day))))?;
        if !(1..=SEASON_DAYS).contains(&day) {
            return Err(parse_err("day", format!("day {day} outside 1..={SEASON_DAYS}")));
        }
        let value: f64 = field(c_val)
            .parse()
            .map_err(|_| parse_err("value", format!("cannot parse `{}` as a number", field(c_val))))?;
        if !value.is_finite() {
            return Err(parse_err("value", "non-finite value".into()));
        }
        let slots = partial
            .entry((location, year))
            .or_insert_with(|| vec![None; WeatherVariable::COUNT * SEASON_DAYS]);
        let slot = &mut slots[var.index() * SEASON_DAYS + day - 1];
        if slot.is_some() {
            return Err(Error::DuplicateKey(format!("{}/{year} {var} day {day}", field(c_loc))));
        }
        *slot = Some(value);
    }

    let mut table = WeatherTable::new();
    for (key, slots) in partial {
        for var in WeatherVariable::ALL {
            let days = &slots[var.index() * SEASON_DAYS..(var.index() + 1) * SEASON_DAYS];
            let found = days.iter().filter(|d| d.is_some()).count();
            if found != SEASON_DAYS {
                return Err(Error::DayCount {
                    location: key.0.clone(),
                    year: key.1,
                    variable: var.name().to_string(),
                    found,
                    expected: SEASON_DAYS,
                });
            }
        }
        let values = slots.into_iter().map(|v| v.unwrap()).collect();
        let series = WeatherSeries::new(key.0.clone(), key.1, values)?;
        table.insert(key, series);
    }
    Ok(table)
}

/// Loads several weather files; a (location, year) may appear in only one of them.
pub fn load_weather_files<P: AsRef<Path>>(paths: &[P]) -> Result<WeatherTable> {
    let mut merged = WeatherTable::new();
    for path in paths {
        for (key, series) in load_weather(path.as_ref())? {
            if merged.contains_key(&key) {
                return Err(Error::DuplicateKey(key_label(&key)));
            }
            merged.insert(key, series);
        }
    }
    Ok(merged)
}

/// Writes the table in long form, keys in sorted order, variables in canonical order.
pub fn write_weather(path: &Path, table: &WeatherTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["location_id", "year", "variable", "day", "value"])
        .map_err(|e| csv_error(path, e))?;
    for series in table.values() {
        let year = series.year.to_string();
        for var in WeatherVariable::ALL {
            for (d, v) in series.variable(var).iter().enumerate() {
                w.write_record([
                    series.location_id.as_str(),
                    year.as_str(),
                    var.name(),
                    &(d + 1).to_string(),
                    &format_float(*v),
                ])
                .map_err(|e| csv_error(path, e))?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    crate::io::write_atomic(path, &bytes)
}

/// Shortest representation that parses back to the same f64.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}
