use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::YieldModel;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::preprocess::{FeatureManifest, FeatureMatrix, RowKey, GROUP_GENOTYPE, GROUP_MG};

/// Per location-year feature templates and observed yields taken from an
/// encoded matrix built without maturity-group columns.
#[derive(Debug, Clone)]
pub struct SelectionContext {
    manifest: FeatureManifest,
    genotypes: Vec<String>,
    genotype_start: usize,
    templates: BTreeMap<(String, i32), Template>,
}

#[derive(Debug, Clone)]
struct Template {
    state: String,
    values: Vec<f64>,
    observed: Vec<f64>,
}

impl SelectionContext {
    pub fn from_matrix(matrix: &FeatureMatrix) -> Result<Self> {
        let manifest = &matrix.manifest;
        if manifest.group(GROUP_MG).is_some() {
            return Err(Error::ManifestMismatch(
                "genotype selection needs features built without maturity group".into(),
            ));
        }
        let group = manifest
            .group(GROUP_GENOTYPE)
            .ok_or_else(|| Error::UnknownGroup(GROUP_GENOTYPE.into()))?;
        let genotypes = manifest.vocabulary(GROUP_GENOTYPE).unwrap_or_default().to_vec();
        let mut templates: BTreeMap<(String, i32), Template> = BTreeMap::new();
        for (i, key) in matrix.rows.iter().enumerate() {
            templates
                .entry((key.location_id.clone(), key.year))
                .or_insert_with(|| {
                    let mut values = matrix.values.row(i).to_vec();
                    values[group.columns()].fill(0.0);
                    Template {
                        state: key.state.clone(),
                        values,
                        observed: Vec::new(),
                    }
                })
                .observed
                .push(matrix.targets[i]);
        }
        Ok(Self {
            manifest: manifest.clone(),
            genotypes,
            genotype_start: group.start,
            templates,
        })
    }

    pub fn genotypes(&self) -> &[String] {
        &self.genotypes
    }

    pub fn location_years(&self) -> impl Iterator<Item = (&str, i32)> {
        self.templates.keys().map(|(l, y)| (l.as_str(), *y))
    }

    /// One row per genotype in the vocabulary at `(location, year)`.
    pub fn candidate_matrix(&self, location: &str, year: i32) -> Result<FeatureMatrix> {
        let t = self.templates.get(&(location.to_string(), year)).ok_or_else(|| {
            Error::InvalidInput(format!("no weather or features for location {location}, year {year}"))
        })?;
        let g = self.genotypes.len();
        let mut values = Array2::zeros((g, t.values.len()));
        for (i, mut row) in values.rows_mut().into_iter().enumerate() {
            row.assign(&ndarray::ArrayView1::from(&t.values));
            row[self.genotype_start + i] = 1.0;
        }
        Ok(FeatureMatrix {
            values,
            manifest: self.manifest.clone(),
            targets: vec![0.0; g],
            rows: self
                .genotypes
                .iter()
                .map(|id| RowKey {
                    location_id: location.to_string(),
                    year,
                    genotype_id: id.clone(),
                    state: t.state.clone(),
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenotypeRanking {
    pub location_id: String,
    pub year: i32,
    pub state: String,
    pub k: usize,
    /// `(genotype_id, predicted yield)`, best first.
    pub ranked: Vec<(String, f64)>,
    pub top_k_mean: f64,
    /// Observed yields of every record at this location-year.
    pub observed: Vec<f64>,
}

impl GenotypeRanking {
    pub fn observed_mean(&self) -> Option<f64> {
        (!self.observed.is_empty()).then(|| self.observed.iter().sum::<f64>() / self.observed.len() as f64)
    }
}

/// Ranks every genotype by predicted yield at `(location, year)` and keeps
/// the best `k`; equal predictions keep vocabulary order.
pub fn select_top_genotypes(
    model: &dyn YieldModel,
    context: &SelectionContext,
    location: &str,
    year: i32,
    k: usize,
) -> Result<GenotypeRanking> {
    if k == 0 || k > context.genotypes.len() {
        return Err(Error::InvalidInput(format!(
            "k must be in 1..={}, got {k}",
            context.genotypes.len()
        )));
    }
    let candidates = context.candidate_matrix(location, year)?;
    let preds = model.predict(&candidates)?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].total_cmp(&preds[a]));
    let ranked: Vec<(String, f64)> = order[..k]
        .iter()
        .map(|&i| (context.genotypes[i].clone(), preds[i]))
        .collect();
    let t = &context.templates[&(location.to_string(), year)];
    Ok(GenotypeRanking {
        location_id: location.to_string(),
        year,
        state: t.state.clone(),
        k,
        top_k_mean: ranked.iter().map(|(_, p)| p).sum::<f64>() / k as f64,
        ranked,
        observed: t.observed.clone(),
    })
}

pub fn rankings_csv(rankings: &[GenotypeRanking]) -> String {
    let mut out = String::from("location_id,year,rank,genotype_id,predicted_yield\n");
    for r in rankings {
        for (rank, (g, p)) in r.ranked.iter().enumerate() {
            out.push_str(&format!("{},{},{},{},{:.6}\n", r.location_id, r.year, rank + 1, g, p));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub state: String,
    pub year: i32,
    pub mean_gap: f64,
    pub n_locations: usize,
}

/// Per state and year, the mean over locations of (top-k predicted mean -
/// observed mean). Location-years without observations are skipped.
pub fn genotype_gap_report(rankings: &[GenotypeRanking]) -> Vec<GapRow> {
    let mut acc: BTreeMap<(String, i32), (f64, usize)> = BTreeMap::new();
    for r in rankings {
        if let Some(obs) = r.observed_mean() {
            let e = acc.entry((r.state.clone(), r.year)).or_default();
            e.0 += r.top_k_mean - obs;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|((state, year), (sum, n))| GapRow {
            state,
            year,
            mean_gap: sum / n as f64,
            n_locations: n,
        })
        .collect()
}

pub fn gap_csv(rows: &[GapRow]) -> String {
    let mut out = String::from("state,year,mean_gap\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.6}\n", r.state, r.year, r.mean_gap));
    }
    out
}

pub fn write_selection_csvs(rankings: &[GenotypeRanking], ranking_path: &Path, gap_path: &Path) -> Result<()> {
    write_atomic(ranking_path, rankings_csv(rankings).as_bytes())?;
    write_atomic(gap_path, gap_csv(&genotype_gap_report(rankings)).as_bytes())
}
