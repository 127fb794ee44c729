use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use yieldcast::dataset::{SyntheticConfig, ValidationMode};
use yieldcast::models::{ArchitectureConfig, ArchitectureKind, TrainConfig};
use yieldcast::nn::{AdamConfig, LrSchedule};
use yieldcast::preprocess::{BuildOptions, DownsamplePolicy, DEFAULT_RATIOS};

/// A run configuration. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    /// Per-architecture overrides, keyed `cnn-dnn` / `cnn-lstm-dnn`.
    #[serde(default)]
    pub architecture: BTreeMap<String, ArchitectureConfig>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub lasso: LassoSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub importance: ImportanceSection,
    #[serde(default)]
    pub selection: SelectionSection,
    /// Generator settings for `synth`.
    #[serde(default)]
    pub synth: Option<SyntheticConfig>,
}

fn default_out() -> PathBuf {
    PathBuf::from("run")
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub records: Vec<PathBuf>,
    pub weather: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub include_mg: bool,
    pub split_seed: Option<u64>,
    pub ratios: [f64; 3],
    pub downsample: DownsamplePolicy,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            include_mg: true,
            split_seed: None,
            ratios: DEFAULT_RATIOS,
            downsample: DownsamplePolicy::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            include_mg: self.include_mg,
            downsample: self.downsample,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub iterations: usize,
    pub batch_size: usize,
    pub log_interval: usize,
    pub learning_rate: f64,
    pub decay_rate: f64,
    pub decay_interval: usize,
    pub adam: AdamConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            iterations: t.iterations,
            batch_size: t.batch_size,
            log_interval: t.log_interval,
            learning_rate: t.schedule.base,
            decay_rate: t.schedule.decay_rate,
            decay_interval: t.schedule.decay_interval,
            adam: t.adam,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            seed,
            log_interval: self.log_interval,
            schedule: LrSchedule {
                base: self.learning_rate,
                decay_rate: self.decay_rate,
                decay_interval: self.decay_interval,
            },
            adam: self.adam,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoSection {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoSection {
    fn default() -> Self {
        Self {
            alpha: yieldcast::baselines::DEFAULT_ALPHA,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub members: Vec<String>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            members: vec![
                ArchitectureKind::CnnDnn.name().into(),
                ArchitectureKind::CnnLstmDnn.name().into(),
            ],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImportanceSection {
    pub repetitions: usize,
    /// Empty means every column group.
    pub groups: Vec<String>,
    pub period_variables: Vec<String>,
}

impl Default for ImportanceSection {
    fn default() -> Self {
        Self {
            repetitions: 5,
            groups: Vec::new(),
            period_variables: yieldcast::dataset::WeatherVariable::ALL
                .iter()
                .map(|v| v.name().to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    /// Model that scores candidate genotypes: an architecture name, `lasso` or `gem`.
    pub model: String,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            model: ArchitectureKind::CnnDnn.name().into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.data.records.iter_mut().for_each(resolve);
        config.data.weather.iter_mut().for_each(resolve);
        resolve(&mut config.out_dir);
        for key in config.architecture.keys() {
            key.parse::<ArchitectureKind>()?;
        }
        Ok(config)
    }

    pub fn validation_mode(&self) -> ValidationMode {
        if self.strict {
            ValidationMode::Strict
        } else {
            ValidationMode::Lenient
        }
    }

    pub fn architecture(&self, kind: ArchitectureKind) -> ArchitectureConfig {
        self.architecture
            .get(kind.name())
            .cloned()
            .unwrap_or_else(|| ArchitectureConfig::for_kind(kind))
    }
}
