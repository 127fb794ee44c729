use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use yieldcast::analysis::{
    per_period_importance, permutation_importance, select_top_genotypes, write_selection_csvs, LinearModel,
    SelectionContext, WeightedEnsemble, YieldModel,
};
use yieldcast::baselines::{lasso_fit, LassoModel};
use yieldcast::dataset::{
    generate_synthetic, join_and_validate, load_performance_records, load_weather_files, write_performance_records,
    write_weather, JoinedDataset, RecordSchema, SyntheticConfig, WeatherVariable,
};
use yieldcast::ensemble::{optimize_weights, EnsembleWeights, PredictionMatrix};
use yieldcast::evaluation::{aggregate_by_region, write_metrics_csv, Metrics};
use yieldcast::io::{derive_seed, read_json, write_atomic, write_json_atomic};
use yieldcast::models::{train, ArchitectureKind, Network, TrainedModel};
use yieldcast::preprocess::{
    prepare, read_feature_cache, write_feature_cache, FeatureManifest, FeatureMatrix, PreparedFeatures,
};

use crate::config::RunConfig;

pub const DATASET: &str = "dataset.json";
pub const VALIDATION_REPORT: &str = "validation_report.jsonl";
pub const FEATURES: &str = "features.ycfm";
pub const ENSEMBLE_WEIGHTS: &str = "ensemble_weights.json";
pub const METRICS: &str = "metrics.csv";
pub const REGION_ERRORS: &str = "region_errors.csv";
pub const IMPORTANCE: &str = "importance.csv";
pub const IMPORTANCE_PERIODS: &str = "importance_periods.csv";
pub const RANKINGS: &str = "genotype_rankings.csv";
pub const GAPS: &str = "genotype_gaps.csv";
pub const LASSO: &str = "lasso";
pub const GEM: &str = "gem";

const STREAM_SPLIT: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_IMPORTANCE: u64 = 4;
const STREAM_SYNTH: u64 = 5;

/// Resolved settings shared by every command.
pub struct Run {
    pub config: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn model_path(&self, label: &str) -> PathBuf {
        if label == LASSO {
            self.out.join("models").join("lasso.json")
        } else {
            self.out.join("models").join(format!("{label}.ycnn"))
        }
    }

    fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let path = self.path(name);
        ensure!(
            path.exists(),
            "{} not found; run `yieldcast {producer}` first",
            path.display()
        );
        Ok(path)
    }

    fn features(&self) -> Result<PreparedFeatures> {
        let path = self.require(FEATURES, "preprocess")?;
        read_feature_cache(&path).with_context(|| format!("reading feature cache {}", path.display()))
    }

    fn load_model(&self, label: &str, features: &PreparedFeatures) -> Result<LoadedModel> {
        let path = self.model_path(label);
        ensure!(
            path.exists(),
            "model {} not found; run `yieldcast train --arch {label}` first",
            path.display()
        );
        let (model, hash) = if label == LASSO {
            let m = LassoModel::load(&path)?;
            let hash = m.feature_hash.clone();
            (LoadedModel::Lasso(m, features.matrix.manifest.clone()), hash)
        } else {
            label.parse::<ArchitectureKind>()?;
            let m = TrainedModel::load(&path)?;
            let hash = Some(m.feature_hash.clone());
            (LoadedModel::Net(Box::new(m)), hash)
        };
        if let Some(hash) = hash {
            ensure!(
                hash == features.content_hash,
                "{} was trained on features {hash}, but {} has hash {}; retrain or rebuild",
                path.display(),
                FEATURES,
                features.content_hash
            );
        }
        Ok(model)
    }

    /// Every model file present in the run directory, in a fixed order.
    fn available_models(&self) -> Vec<String> {
        [
            ArchitectureKind::CnnDnn.name(),
            ArchitectureKind::CnnLstmDnn.name(),
            LASSO,
        ]
        .into_iter()
        .filter(|l| self.model_path(l).exists())
        .map(String::from)
        .collect()
    }

    fn ensemble_weights(&self) -> Result<Option<EnsembleWeights>> {
        let path = self.path(ENSEMBLE_WEIGHTS);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(read_json(&path)?))
    }
}

pub enum LoadedModel {
    Net(Box<TrainedModel>),
    Lasso(LassoModel, FeatureManifest),
}

impl YieldModel for LoadedModel {
    fn predict(&self, matrix: &FeatureMatrix) -> yieldcast::Result<Vec<f64>> {
        match self {
            LoadedModel::Net(m) => m.predict(matrix),
            LoadedModel::Lasso(model, manifest) => LinearModel { model, manifest }.predict(matrix),
        }
    }

    fn manifest(&self) -> &FeatureManifest {
        match self {
            LoadedModel::Net(m) => m.manifest(),
            LoadedModel::Lasso(_, manifest) => manifest,
        }
    }

    fn describe(&self) -> String {
        match self {
            LoadedModel::Net(m) => YieldModel::describe(&**m),
            LoadedModel::Lasso(..) => LASSO.into(),
        }
    }
}

pub fn ingest(run: &Run) -> Result<()> {
    let data = &run.config.data;
    ensure!(
        !data.records.is_empty() && !data.weather.is_empty(),
        "config needs at least one [data] records file and one weather file"
    );
    let schema = RecordSchema::default();
    let mut records = Vec::new();
    for path in &data.records {
        records.extend(load_performance_records(path, &schema)?);
    }
    let weather = load_weather_files(&data.weather)?;
    let n_records = records.len();
    let n_weather = weather.len();
    let (dataset, report) = join_and_validate(records, weather, run.config.validation_mode())?;
    write_atomic(&run.path(VALIDATION_REPORT), report.to_json_lines().as_bytes())?;
    write_json_atomic(&run.path(DATASET), &dataset)?;
    println!(
        "ingest: {} of {n_records} records joined to {n_weather} weather series, {} violation(s)",
        dataset.records.len(),
        report.violations.len()
    );
    Ok(())
}

pub fn preprocess(run: &Run) -> Result<()> {
    let path = run.require(DATASET, "ingest")?;
    let dataset: JoinedDataset = read_json(&path)?;
    let pre = &run.config.preprocess;
    let split_seed = pre.split_seed.unwrap_or_else(|| derive_seed(run.seed, &[STREAM_SPLIT]));
    let prepared = prepare(&dataset, pre.build_options(), pre.ratios, split_seed)?;
    write_feature_cache(&run.path(FEATURES), &prepared)?;
    println!(
        "preprocess: {} rows x {} columns (train {}, val {}, test {}), hash {}",
        prepared.matrix.n_rows(),
        prepared.matrix.n_cols(),
        prepared.split.train.len(),
        prepared.split.validation.len(),
        prepared.split.test.len(),
        &prepared.content_hash[..12]
    );
    Ok(())
}

pub fn train_model(run: &Run, arch: &str) -> Result<()> {
    let features = run.features()?;
    let path = run.model_path(arch);
    if arch == LASSO {
        return train_lasso(run, &features, &path);
    }
    let kind: ArchitectureKind = arch.parse()?;
    let tag = kind as u64;
    let arch_config = run
        .config
        .architecture(kind)
        .with_seed(derive_seed(run.seed, &[STREAM_INIT, tag]));
    let train_config = run
        .config
        .train
        .to_train_config(derive_seed(run.seed, &[STREAM_TRAIN, tag]));
    let network = Network::build(arch_config, &features.matrix.manifest)?;
    let (network, history) = train(
        network,
        &features.matrix,
        &features.split.train,
        &features.split.validation,
        &train_config,
    )?;
    let model = TrainedModel {
        network,
        normalizer: features.normalizer.clone(),
        feature_hash: features.content_hash.clone(),
        history,
    };
    model.save(&path)?;
    let history_path = path.with_file_name(format!("{arch}_history.csv"));
    model.history.write_csv(&history_path)?;
    println!(
        "train {arch}: {} iterations, best validation RMSE {:.4} at step {}",
        train_config.iterations, model.history.best_val_rmse, model.history.best_step
    );
    Ok(())
}

fn train_lasso(run: &Run, features: &PreparedFeatures, path: &Path) -> Result<()> {
    let train = features.matrix.select_rows(&features.split.train);
    let cfg = &run.config.lasso;
    let mut model = lasso_fit(train.values.view(), &train.targets, cfg.alpha, cfg.tol, cfg.max_iter)?;
    model.feature_hash = Some(features.content_hash.clone());
    model.save(path)?;
    println!(
        "train lasso: alpha {}, {} sweeps, {} nonzero coefficients{}",
        model.alpha,
        model.sweeps,
        model.n_nonzero(),
        if model.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

pub fn ensemble(run: &Run) -> Result<()> {
    let features = run.features()?;
    let members = &run.config.ensemble.members;
    ensure!(!members.is_empty(), "[ensemble] members is empty");
    let val = features.matrix.select_rows(&features.split.validation);
    let mut columns = Vec::with_capacity(members.len());
    for label in members {
        let model = run.load_model(label, &features)?;
        columns.push((label.clone(), model.predict(&val)?));
    }
    let p = PredictionMatrix::from_columns(columns, val.targets.clone())?;
    let weights = optimize_weights(&p)?;
    write_json_atomic(&run.path(ENSEMBLE_WEIGHTS), &weights)?;
    let summary: Vec<String> = weights
        .labels
        .iter()
        .zip(&weights.weights)
        .map(|(l, w)| format!("{l}={w:.4}"))
        .collect();
    println!(
        "ensemble: {} (validation MSE {:.4}, {} iterations)",
        summary.join(", "),
        weights.objective,
        weights.iterations
    );
    Ok(())
}

/// Loaded base models plus the GEM ensemble when its weights exist.
struct ModelSet {
    labels: Vec<String>,
    models: Vec<LoadedModel>,
    weights: Option<EnsembleWeights>,
}

impl ModelSet {
    fn load(run: &Run, features: &PreparedFeatures) -> Result<Self> {
        let weights = run.ensemble_weights()?;
        let mut labels = run.available_models();
        if let Some(w) = &weights {
            for l in &w.labels {
                if !labels.contains(l) {
                    labels.push(l.clone());
                }
            }
        }
        ensure!(
            !labels.is_empty(),
            "no trained models found; run `yieldcast train` first"
        );
        let models = labels
            .iter()
            .map(|l| run.load_model(l, features))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels,
            models,
            weights,
        })
    }

    fn get(&self, label: &str) -> Option<&dyn YieldModel> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(&self.models[i])
    }

    fn gem(&self) -> Result<Option<WeightedEnsemble<'_>>> {
        let Some(weights) = &self.weights else { return Ok(None) };
        let members = weights
            .labels
            .iter()
            .map(|l| self.get(l).expect("ensemble member loaded"))
            .collect();
        Ok(Some(WeightedEnsemble::new(members, weights.clone())?))
    }
}

pub fn evaluate(run: &Run) -> Result<()> {
    let features = run.features()?;
    let set = ModelSet::load(run, &features)?;
    let gem = set.gem()?;
    let mut scored: Vec<(String, &dyn YieldModel)> = set
        .labels
        .iter()
        .map(|l| (l.clone(), set.get(l).expect("loaded")))
        .collect();
    if let Some(g) = &gem {
        scored.push((GEM.into(), g));
    }
    let mut rows = Vec::new();
    let mut region = None;
    for (split, idx) in [("val", &features.split.validation), ("test", &features.split.test)] {
        let m = features.matrix.select_rows(idx);
        for (label, model) in &scored {
            let pred = model.predict(&m)?;
            rows.push(Metrics::compute(label.clone(), split, &m.targets, &pred)?);
            if split == "test" && (label == GEM || gem.is_none() && region.is_none()) {
                region = Some(aggregate_by_region(&m.rows, &m.targets, &pred)?);
            }
        }
    }
    write_metrics_csv(&run.path(METRICS), &rows)?;
    let region = region.expect("at least one model scored");
    region.write_csv(&run.path(REGION_ERRORS))?;
    let best = rows
        .iter()
        .filter(|m| m.split == "test")
        .min_by(|a, b| a.rmse.total_cmp(&b.rmse))
        .expect("test metrics");
    println!(
        "evaluate: {} models, best test RMSE {:.4} ({}), {} states in region report",
        scored.len(),
        best.rmse,
        best.model,
        region.states.len()
    );
    Ok(())
}

pub fn importance(run: &Run) -> Result<()> {
    let features = run.features()?;
    let set = ModelSet::load(run, &features)?;
    let gem = set.gem()?;
    let model: &dyn YieldModel = match &gem {
        Some(g) => g,
        None => set.get(&set.labels[0]).expect("loaded"),
    };
    let cfg = &run.config.importance;
    let test = features.matrix.select_rows(&features.split.test);
    let groups: Vec<&str> = if cfg.groups.is_empty() {
        test.manifest.groups.iter().map(|g| g.name.as_str()).collect()
    } else {
        cfg.groups.iter().map(String::as_str).collect()
    };
    let seed = derive_seed(run.seed, &[STREAM_IMPORTANCE]);
    let report = permutation_importance(model, &test, &groups, cfg.repetitions, seed)?;
    report.write_csv(&run.path(IMPORTANCE))?;
    let mut periods = String::new();
    for name in &cfg.period_variables {
        let variable = parse_variable(name)?;
        let p = per_period_importance(model, &test, variable, cfg.repetitions, seed)?;
        let csv = p.to_csv();
        if periods.is_empty() {
            periods.push_str(&csv);
        } else {
            periods.push_str(csv.split_once('\n').map_or("", |(_, body)| body));
        }
    }
    write_atomic(&run.path(IMPORTANCE_PERIODS), periods.as_bytes())?;
    let top = report
        .groups
        .iter()
        .max_by(|a, b| a.rmse_change.total_cmp(&b.rmse_change))
        .map(|g| format!("{} ({:+.4})", g.group, g.rmse_change))
        .unwrap_or_default();
    println!(
        "importance: model {}, baseline RMSE {:.4}, {} groups, top {top}",
        report.model,
        report.baseline_rmse,
        report.groups.len()
    );
    Ok(())
}

fn parse_variable(name: &str) -> Result<WeatherVariable> {
    WeatherVariable::ALL
        .into_iter()
        .find(|v| v.name() == name)
        .with_context(|| format!("unknown weather variable `{name}`"))
}

pub fn select_genotypes(run: &Run, k: usize, model: Option<&str>) -> Result<()> {
    let features = run.features()?;
    let context = SelectionContext::from_matrix(&features.matrix)
        .context("genotype selection needs features built with include_mg = false")?;
    let label = model.unwrap_or(&run.config.selection.model);
    let set = ModelSet::load(run, &features)?;
    let gem = set.gem()?;
    let model: &dyn YieldModel = if label == GEM {
        match &gem {
            Some(g) => g,
            None => bail!(
                "{} not found; run `yieldcast ensemble` first",
                run.path(ENSEMBLE_WEIGHTS).display()
            ),
        }
    } else {
        match set.get(label) {
            Some(m) => m,
            None => bail!(
                "model {} not found; run `yieldcast train --arch {label}` first",
                run.model_path(label).display()
            ),
        }
    };
    let rankings = context
        .location_years()
        .map(|(loc, year)| select_top_genotypes(model, &context, loc, year, k))
        .collect::<yieldcast::Result<Vec<_>>>()?;
    write_selection_csvs(&rankings, &run.path(RANKINGS), &run.path(GAPS))?;
    println!(
        "select-genotypes: top {k} of {} genotypes at {} location-years using {label}",
        context.genotypes().len(),
        rankings.len()
    );
    Ok(())
}

/// Writes a synthetic records/weather pair (and its ground truth) into the output directory.
pub fn synth(run: &Run) -> Result<()> {
    let config: SyntheticConfig = run.config.synth.clone().unwrap_or_default();
    let data = generate_synthetic(&config, derive_seed(run.seed, &[STREAM_SYNTH]))?;
    std::fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
    write_performance_records(&run.path("records.csv"), &data.dataset.records)?;
    write_weather(&run.path("weather.csv"), &data.dataset.weather)?;
    write_json_atomic(&run.path("truth.json"), &data.truth)?;
    println!(
        "synth: {} records, {} weather series in {}",
        data.dataset.records.len(),
        data.dataset.weather.len(),
        run.out.display()
    );
    Ok(())
}
