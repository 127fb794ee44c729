use std::path::Path;

use serde::{Deserialize, Serialize};

use super::weather::{csv_error, format_float};
use crate::error::{Error, Result};

/// One observed yield (bushels per acre) for a genotype at a location-year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub location_id: String,
    pub year: i32,
    pub genotype_id: String,
    /// Absent at prediction time for models trained without it.
    pub maturity_group: Option<String>,
    pub state: String,
    #[serde(rename = "yield")]
    pub yield_value: f64,
    /// Upstream K-means cluster label; carried through, never encoded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genotype_cluster: Option<String>,
}

/// Maps logical record fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordSchema {
    pub location_id: String,
    pub year: String,
    pub genotype_id: String,
    pub maturity_group: String,
    pub state: String,
    pub yield_column: String,
    /// Optional pass-through column; ignored when absent from the file.
    pub genotype_cluster: Option<String>,
    /// Inclusive bounds on accepted years.
    pub year_range: Option<(i32, i32)>,
}

impl Default for RecordSchema {
    fn default() -> Self {
        Self {
            location_id: "location_id".into(),
            year: "year".into(),
            genotype_id: "genotype_id".into(),
            maturity_group: "maturity_group".into(),
            state: "state".into(),
            yield_column: "yield".into(),
            genotype_cluster: Some("genotype_cluster".into()),
            year_range: None,
        }
    }
}

pub fn load_performance_records(path: &Path, schema: &RecordSchema) -> Result<Vec<PerformanceRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let col = |name: &str| -> Result<usize> {
        find(name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let c_loc = col(&schema.location_id)?;
    let c_year = col(&schema.year)?;
    let c_gen = col(&schema.genotype_id)?;
    let c_mg = col(&schema.maturity_group)?;
    let c_state = col(&schema.state)?;
    let c_yield = col(&schema.yield_column)?;
    let c_cluster = schema.genotype_cluster.as_deref().and_then(find);

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let err = |column: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message,
        };
        let ident = |c: usize, column: &str| -> Result<String> {
            let v = field(c);
            if v.is_empty() {
                Err(err(column, "empty identifier".into()))
            } else {
                Ok(v.to_string())
            }
        };

        let year: i32 = field(c_year)
            .parse()
            .map_err(|_| err(&schema.year, format!("cannot parse `{}` as a year", field(c_year))))?;
        if let Some((lo, hi)) = schema.year_range {
            if year < lo || year > hi {
                return Err(err(&schema.year, format!("year {year} outside {lo}..={hi}")));
            }
        }
        let yield_value: f64 = field(c_yield).parse().map_err(|_| {
            err(
                &schema.yield_column,
                format!("cannot parse `{}` as a yield", field(c_yield)),
            )
        })?;
        if !yield_value.is_finite() || yield_value < 0.0 {
            return Err(err(
                &schema.yield_column,
                format!("yield must be finite and non-negative, got {yield_value}"),
            ));
        }
        let mg = field(c_mg);
        out.push(PerformanceRecord {
            location_id: ident(c_loc, &schema.location_id)?,
            year,
            genotype_id: ident(c_gen, &schema.genotype_id)?,
            maturity_group: (!mg.is_empty()).then(|| mg.to_string()),
            state: ident(c_state, &schema.state)?,
            yield_value,
            genotype_cluster: c_cluster.map(field).filter(|s| !s.is_empty()).map(str::to_string),
        });
    }
    Ok(out)
}

/// Writes records with the default header; the cluster column is emitted only if any record has one.
pub fn write_performance_records(path: &Path, records: &[PerformanceRecord]) -> Result<()> {
    let with_cluster = records.iter().any(|r| r.genotype_cluster.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["location_id", "year", "genotype_id", "maturity_group", "state", "yield"];
    if with_cluster {
        header.push("genotype_cluster");
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in records {
        let year = r.year.to_string();
        let y = format_float(r.yield_value);
        let mut row = vec![
            r.location_id.as_str(),
            year.as_str(),
            r.genotype_id.as_str(),
            r.maturity_group.as_deref().unwrap_or(""),
            r.state.as_str(),
            y.as_str(),
        ];
        if with_cluster {
            row.push(r.genotype_cluster.as_deref().unwrap_or(""));
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    crate::io::write_atomic(path, &bytes)
}
