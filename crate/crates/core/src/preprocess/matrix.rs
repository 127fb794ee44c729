use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::downsample::{downsample_weather, DownsamplePolicy, PERIODS};
use super::encode::category_index;
use crate::dataset::{JoinedDataset, Vocabularies, WeatherKey, WeatherSeries, WeatherVariable};
use crate::error::{Error, Result};

/// Width of the weather block: 7 variables x 53 periods.
pub const WEATHER_COLUMNS: usize = WeatherVariable::COUNT * PERIODS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    Categorical { vocabulary: Vec<String> },
    Weather { variable: WeatherVariable },
}

/// A named, contiguous range of columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
    #[serde(flatten)]
    pub kind: GroupKind,
}

impl ColumnGroup {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Column layout of a [`FeatureMatrix`]: one-hot groups first, then the
/// seven weather groups of 53 periods each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub groups: Vec<ColumnGroup>,
    pub n_columns: usize,
    pub periods: usize,
    pub downsample: DownsamplePolicy,
}

impl FeatureManifest {
    /// Column layout implied by a set of vocabularies.
    pub fn for_vocabularies(vocab: &Vocabularies, options: BuildOptions) -> Result<Self> {
        let years: Vec<String> = vocab.years.iter().map(|y| y.to_string()).collect();
        let mut cat: Vec<(&str, Vec<String>)> = vec![
            (GROUP_LOCATION, vocab.locations.clone()),
            (GROUP_YEAR, years),
            (GROUP_GENOTYPE, vocab.genotypes.clone()),
        ];
        if options.include_mg {
            if vocab.maturity_groups.is_empty() {
                return Err(Error::InvalidInput(
                    "maturity group requested but no record carries one".into(),
                ));
            }
            cat.push((GROUP_MG, vocab.maturity_groups.clone()));
        }
        if let Some((name, _)) = cat.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::InvalidInput(format!("empty vocabulary for `{name}`")));
        }

        let mut groups = Vec::new();
        let mut start = 0;
        for (name, v) in cat {
            groups.push(ColumnGroup {
                name: name.to_string(),
                start,
                len: v.len(),
                kind: GroupKind::Categorical { vocabulary: v },
            });
            start += groups.last().unwrap().len;
        }
        for var in WeatherVariable::ALL {
            groups.push(ColumnGroup {
                name: var.name().to_string(),
                start,
                len: PERIODS,
                kind: GroupKind::Weather { variable: var },
            });
            start += PERIODS;
        }
        Ok(FeatureManifest {
            groups,
            n_columns: start,
            periods: PERIODS,
            downsample: options.downsample,
        })
    }

    pub fn group(&self, name: &str) -> Option<&ColumnGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn weather_group(&self, var: WeatherVariable) -> Option<&ColumnGroup> {
        self.group(var.name())
    }

    pub fn categorical_groups(&self) -> impl Iterator<Item = &ColumnGroup> {
        self.groups
            .iter()
            .filter(|g| matches!(g.kind, GroupKind::Categorical { .. }))
    }

    /// Indices of every one-hot column, in group order.
    pub fn categorical_columns(&self) -> Vec<usize> {
        self.categorical_groups().flat_map(|g| g.columns()).collect()
    }

    pub fn weather_columns(&self) -> Vec<usize> {
        self.groups
            .iter()
            .filter(|g| matches!(g.kind, GroupKind::Weather { .. }))
            .flat_map(|g| g.columns())
            .collect()
    }

    /// `(variable, 1-based period)` of a weather column.
    pub fn period_of(&self, column: usize) -> Option<(WeatherVariable, usize)> {
        self.groups.iter().find_map(|g| match g.kind {
            GroupKind::Weather { variable } if g.columns().contains(&column) => Some((variable, column - g.start + 1)),
            _ => None,
        })
    }

    pub fn vocabulary(&self, group: &str) -> Option<&[String]> {
        match &self.group(group)?.kind {
            GroupKind::Categorical { vocabulary } => Some(vocabulary),
            GroupKind::Weather { .. } => None,
        }
    }

    /// Checks that groups tile `0..n_columns` in order with no gaps.
    pub fn check_partition(&self) -> Result<()> {
        let mut next = 0;
        for g in &self.groups {
            if g.start != next || g.len == 0 {
                return Err(Error::ManifestMismatch(format!(
                    "group `{}` starts at {} (expected {next}) with width {}",
                    g.name, g.start, g.len
                )));
            }
            next += g.len;
        }
        if next != self.n_columns {
            return Err(Error::ManifestMismatch(format!(
                "groups cover {next} columns, manifest declares {}",
                self.n_columns
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub location_id: String,
    pub year: i32,
    pub genotype_id: String,
    pub state: String,
}

/// Encoded design matrix with targets and per-row identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub manifest: FeatureManifest,
    pub targets: Vec<f64>,
    pub rows: Vec<RowKey>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(ndarray::Axis(0), idx),
            manifest: self.manifest.clone(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// SHA-256 over the manifest, row keys, targets and value bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.manifest).expect("manifest serializes"));
        h.update(serde_json::to_vec(&self.rows).expect("rows serialize"));
        for t in &self.targets {
            h.update(t.to_le_bytes());
        }
        h.update((self.n_rows() as u64).to_le_bytes());
        h.update((self.n_cols() as u64).to_le_bytes());
        for v in self.values.iter() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    pub include_mg: bool,
    pub downsample: DownsamplePolicy,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            include_mg: true,
            downsample: DownsamplePolicy::TailWindow,
        }
    }
}

/// Group names of the one-hot block, in column order.
pub const GROUP_LOCATION: &str = "location";
pub const GROUP_YEAR: &str = "year";
pub const GROUP_GENOTYPE: &str = "genotype";
pub const GROUP_MG: &str = "MG";

/// Concatenated downsampled weather for one series, variable-major.
pub fn weather_features(series: &WeatherSeries, policy: DownsamplePolicy) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(WEATHER_COLUMNS);
    for var in WeatherVariable::ALL {
        out.extend(downsample_weather(series.variable(var), policy)?);
    }
    Ok(out)
}

/// Encodes a joined dataset: `[location | year | genotype | MG? | ADNI .. AvgSur]`.
///
/// Vocabularies come from the dataset (all rows), so every split shares
/// the same column geometry. Weather values are raw period means; normalize
/// separately with training rows only.
pub fn build_feature_matrix(dataset: &JoinedDataset, options: BuildOptions) -> Result<FeatureMatrix> {
    let manifest = FeatureManifest::for_vocabularies(&dataset.vocab, options)?;
    let weather_start = manifest.n_columns - WEATHER_COLUMNS;

    let mut weather_cache: BTreeMap<&WeatherKey, Vec<f64>> = BTreeMap::new();
    for (k, s) in &dataset.weather {
        weather_cache.insert(k, weather_features(s, options.downsample)?);
    }

    let n = dataset.records.len();
    let mut values = Array2::zeros((n, manifest.n_columns));
    let mut targets = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for (i, r) in dataset.records.iter().enumerate() {
        let year = r.year.to_string();
        let mg;
        let mut fields: Vec<&str> = vec![&r.location_id, &year, &r.genotype_id];
        if options.include_mg {
            mg = r
                .maturity_group
                .clone()
                .ok_or_else(|| Error::InvalidInput(format!("record {} has no maturity group", i + 1)))?;
            fields.push(&mg);
        }
        for (g, value) in manifest.groups.iter().zip(fields) {
            let GroupKind::Categorical { vocabulary } = &g.kind else {
                unreachable!()
            };
            values[[i, g.start + category_index(&g.name, value, vocabulary)?]] = 1.0;
        }
        let key = (r.location_id.clone(), r.year);
        let w = weather_cache
            .get(&key)
            .ok_or_else(|| Error::InvalidInput(format!("record {} has no weather for {}/{}", i + 1, key.0, key.1)))?;
        for (j, v) in w.iter().enumerate() {
            values[[i, weather_start + j]] = *v;
        }
        targets.push(r.yield_value);
        rows.push(RowKey {
            location_id: r.location_id.clone(),
            year: r.year,
            genotype_id: r.genotype_id.clone(),
            state: r.state.clone(),
        });
    }

    Ok(FeatureMatrix {
        values,
        manifest,
        targets,
        rows,
    })
}
