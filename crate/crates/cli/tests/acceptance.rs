//! Acceptance run: one `[PASS]`/`[FAIL]`/`[SKIP]` line per criterion.
//!
//! AC11 needs the competition dataset; point `YIELDCAST_COMPETITION_CONFIG`
//! at a run config over it to enable that check.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use yieldcast::analysis::{
    genotype_gap_report, per_period_importance, permutation_importance, select_top_genotypes, GenotypeRanking,
    SelectionContext, YieldModel,
};
use yieldcast::baselines::{lasso_fit, lasso_objective};
use yieldcast::dataset::{generate_synthetic, SignalTerm, SyntheticConfig, Vocabularies, WeatherVariable, SEASON_DAYS};
use yieldcast::ensemble::{grid_oracle, optimize_weights, PredictionMatrix};
use yieldcast::evaluation::{aggregate_by_region, mae, pearson_r, rmse};
use yieldcast::models::{train, ArchitectureConfig, ArchitectureKind, ConvSpec, DropoutConfig, Network, TrainConfig};
use yieldcast::nn::{grad_check, mse_loss, Graph, Mode, ParamStore, Tensor};
use yieldcast::preprocess::{
    build_feature_matrix, downsample_weather, prepare, BuildOptions, DownsamplePolicy, FeatureManifest, Normalizer,
    PreparedFeatures, RowKey, DEFAULT_RATIOS, GROUP_GENOTYPE, PERIODS, WEATHER_COLUMNS,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, Duration, fn() -> Option<Outcome>);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    log::set_logger(&CAPTURE).expect("logger installs once");
    log::set_max_level(log::LevelFilter::Warn);

    let criteria: [Criterion; 11] = [
        ("AC1", "gradient correctness", secs(60), || Some(ac1())),
        ("AC2", "overfit oracle", secs(300), || Some(ac2())),
        ("AC3", "ensemble oracle equivalence", secs(60), || Some(ac3())),
        ("AC4", "pipeline geometry", secs(60), || Some(ac4())),
        ("AC5", "normalization", secs(60), || Some(ac5())),
        ("AC6", "metric oracles", secs(60), || Some(ac6())),
        ("AC7", "lasso", secs(60), || Some(ac7())),
        ("AC8", "importance recovers planted signal", secs(600), || Some(ac8())),
        ("AC9", "genotype selection", secs(120), || Some(ac9())),
        ("AC10", "end-to-end CLI smoke", secs(600), || Some(ac10())),
        ("AC11", "competition-scale GEM RMSE", Duration::MAX, ac11),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| Some(Err(panic_message(p))));
        let elapsed = start.elapsed();
        let outcome = outcome.map(|o| {
            o.and_then(|detail| {
                if elapsed > limit {
                    Err(format!(
                        "{detail}; took {:.1} s, limit {} s",
                        elapsed.as_secs_f64(),
                        limit.as_secs()
                    ))
                } else {
                    Ok(detail)
                }
            })
        });
        match outcome {
            None => println!("[SKIP] {id} {name}: set YIELDCAST_COMPETITION_CONFIG to run"),
            Some(Ok(detail)) => println!("[PASS] {id} {name}: {detail} ({:.1} s)", elapsed.as_secs_f64()),
            Some(Err(detail)) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {detail} ({:.1} s)", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

struct Capture(Mutex<Vec<String>>);

static CAPTURE: Capture = Capture(Mutex::new(Vec::new()));

impl log::Log for Capture {
    fn enabled(&self, m: &log::Metadata) -> bool {
        m.level() <= log::Level::Warn
    }

    fn log(&self, r: &log::Record) {
        if self.enabled(r.metadata()) {
            self.0.lock().unwrap().push(r.args().to_string());
        }
    }

    fn flush(&self) {}
}

fn prepared(config: &SyntheticConfig, seed: u64, include_mg: bool) -> PreparedFeatures {
    let data = generate_synthetic(config, seed).unwrap();
    let options = BuildOptions {
        include_mg,
        ..BuildOptions::default()
    };
    prepare(&data.dataset, options, DEFAULT_RATIOS, seed).unwrap()
}

fn small_config(kind: ArchitectureKind) -> ArchitectureConfig {
    ArchitectureConfig {
        kind,
        conv: vec![
            ConvSpec {
                filters: 4,
                kernel: 9,
                stride: 1,
            },
            ConvSpec {
                filters: 4,
                kernel: 3,
                stride: 2,
            },
        ],
        post_cnn_units: 32,
        others_units: 32,
        head_units: [32, 32, 16],
        lstm_units: (kind == ArchitectureKind::CnnLstmDnn).then_some(8),
        dropout: DropoutConfig::NONE,
        seed: 3,
    }
}

fn ac1() -> Outcome {
    let f = prepared(&SyntheticConfig::default(), 1, true);
    let manifest = &f.matrix.manifest;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let inputs = Array2::from_shape_fn((4, manifest.n_columns), |_| StandardNormal.sample(&mut rng));
    let targets: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rows = [0, 1, 2, 3];
    let mut parts = Vec::new();
    for kind in [ArchitectureKind::CnnDnn, ArchitectureKind::CnnLstmDnn] {
        let mut config = small_config(kind);
        config.head_units = [6, 5, 4];
        config.others_units = 5;
        config.post_cnn_units = 6;
        config.lstm_units = config.lstm_units.map(|_| 3);
        let net = Network::build(config, manifest).unwrap();
        let run = |p: &ParamStore| -> yieldcast::Result<(f64, Vec<Tensor>)> {
            let (others, weather) = net.layout().batch(inputs.view(), &rows);
            let mut g = Graph::new(p, Mode::Inference, 0);
            let out = net.forward(&mut g, others, weather)?;
            let (loss, grad) = mse_loss(g.value(out).data(), &targets)?;
            let grads = g.backward(out, Tensor::new(vec![rows.len(), 1], grad)?)?;
            Ok((loss, grads.into_param_grads(p)))
        };
        let report = grad_check(net.params(), 1e-5, 8, 5, run).map_err(|e| e.to_string())?;
        check!(
            report.max_rel_error < 1e-5,
            "{kind}: max relative error {:.3e} at {:?}",
            report.max_rel_error,
            report.worst
        );
        parts.push(format!(
            "{kind} max rel {:.2e} over {} entries",
            report.max_rel_error, report.checked
        ));
    }
    Ok(parts.join(", "))
}

fn ac2() -> Outcome {
    let config = SyntheticConfig {
        locations: 8,
        years: 2,
        genotypes: 4,
        maturity_groups: 2,
        states: 2,
        signal: vec![
            SignalTerm::Location { scale: 6.0 },
            SignalTerm::Genotype { scale: 4.0 },
            SignalTerm::WeatherPeriod {
                variable: WeatherVariable::Ap,
                period: 29,
                coefficient: 3.0,
            },
        ],
        noise_sd: 0.0,
        ..SyntheticConfig::default()
    };
    let f = prepared(&config, 5, true);
    check!(f.matrix.n_rows() == 64, "expected 64 rows, got {}", f.matrix.n_rows());
    let all: Vec<usize> = (0..64).collect();
    let net = Network::build(small_config(ArchitectureKind::CnnDnn), &f.matrix.manifest).unwrap();
    let train_config = TrainConfig {
        iterations: 5000,
        batch_size: 48,
        seed: 1,
        log_interval: 500,
        ..TrainConfig::default()
    };
    let (net, _) = train(net, &f.matrix, &all, &all, &train_config).map_err(|e| e.to_string())?;
    let preds = net.predict(&f.matrix).unwrap();
    let train_rmse = naive_rmse(&f.matrix.targets, &preds);
    check!(train_rmse < 0.5, "train RMSE {train_rmse:.4} after 5000 iterations");
    Ok(format!("train RMSE {train_rmse:.4} after 5000 iterations"))
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_gap = 0.0f64;
    for instance in 0..50 {
        let k = if instance % 2 == 0 { 2 } else { 3 };
        let n = rng.random_range(2..=200);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..80.0)).collect();
        let columns: Vec<(String, Vec<f64>)> = (0..k)
            .map(|j| {
                let bias = rng.random_range(-2.0..2.0);
                let scale = rng.random_range(0.5..4.0);
                let col = y
                    .iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + bias + scale * z
                    })
                    .collect();
                (format!("m{j}"), col)
            })
            .collect();
        let best_single = columns
            .iter()
            .map(|(_, c)| naive_mse(&y, c))
            .fold(f64::INFINITY, f64::min);
        let p = PredictionMatrix::from_columns(columns, y.clone()).unwrap();
        let w = optimize_weights(&p).map_err(|e| e.to_string())?;
        let g = grid_oracle(&p, 1e-3).map_err(|e| e.to_string())?;
        let gap = (w.objective - g.objective).abs();
        worst_gap = worst_gap.max(gap);
        check!(
            gap <= 1e-5,
            "instance {instance}: solver {} vs grid {}",
            w.objective,
            g.objective
        );
        check!(
            w.weights.iter().all(|&v| v >= -1e-9) && (w.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
            "instance {instance}: weights off the simplex {:?}",
            w.weights
        );
        let blended: Vec<f64> = (0..n)
            .map(|i| (0..k).map(|j| w.weights[j] * p.predictions()[[i, j]]).sum())
            .collect();
        let mse = naive_mse(&y, &blended);
        check!(
            mse <= best_single + 1e-8,
            "instance {instance}: ensemble MSE {mse} above best member {best_single}"
        );
    }
    Ok(format!("50 instances, max |solver - grid| {worst_gap:.2e}"))
}

fn ac4() -> Outcome {
    let config = SyntheticConfig {
        locations: 7,
        years: 4,
        genotypes: 9,
        maturity_groups: 3,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&config, 4).unwrap();
    let vocab = &data.dataset.vocab;
    let fm = build_feature_matrix(&data.dataset, BuildOptions::default()).unwrap();
    let vocab_total = vocab.locations.len() + vocab.years.len() + vocab.genotypes.len() + vocab.maturity_groups.len();
    check!(vocab_total == 7 + 4 + 9 + 3, "vocabulary sizes {vocab_total}");
    check!(
        fm.n_cols() == vocab_total + 371,
        "{} columns, expected {}",
        fm.n_cols(),
        vocab_total + 371
    );
    check!(
        fm.manifest.weather_columns().len() == 7 * 53 && WEATHER_COLUMNS == 371,
        "weather columns {}",
        fm.manifest.weather_columns().len()
    );

    let competition = Vocabularies {
        locations: (0..159).map(|i| format!("L{i}")).collect(),
        years: (2003..=2015).collect(),
        genotypes: (0..5838).map(|i| format!("G{i}")).collect(),
        maturity_groups: (0..10).map(|i| format!("MG{i}")).collect(),
        states: Vec::new(),
    };
    let m = FeatureManifest::for_vocabularies(&competition, BuildOptions::default()).unwrap();
    check!(m.n_columns == 6391, "competition schema gives {} columns", m.n_columns);

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let series: Vec<f64> = (0..SEASON_DAYS).map(|_| rng.random_range(-50.0..50.0)).collect();
        let periods = downsample_weather(&series, DownsamplePolicy::TailWindow).unwrap();
        check!(periods.len() == PERIODS, "{} periods", periods.len());
        let weighted: f64 = periods
            .iter()
            .enumerate()
            .map(|(p, v)| v * if p == 52 { 6.0 } else { 4.0 })
            .sum::<f64>()
            / 214.0;
        let mean = series.iter().sum::<f64>() / 214.0;
        worst = worst.max((weighted - mean).abs());
    }
    check!(worst <= 1e-12, "length-weighted period mean off by {worst:.3e}");
    Ok(format!(
        "{} = {vocab_total} + 371 columns; competition schema 6391; period-mean error {worst:.1e}",
        fm.n_cols()
    ))
}

fn ac5() -> Outcome {
    let f = prepared(&SyntheticConfig::default(), 2, true);
    let mut worst_mean = 0.0f64;
    let mut worst_sd = 0.0f64;
    for (k, &c) in f.normalizer.columns.iter().enumerate() {
        if f.normalizer.degenerate.contains(&k) {
            continue;
        }
        let v: Vec<f64> = f.split.train.iter().map(|&r| f.matrix.values[[r, c]]).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_sd = worst_sd.max((sd - 1.0).abs());
    }
    check!(worst_mean < 1e-10, "training column mean {worst_mean:.3e}");
    check!(worst_sd < 1e-10, "training column |sd - 1| {worst_sd:.3e}");

    let mut data = Array2::from_shape_fn((6, 3), |(i, j)| (i * (j + 1)) as f64);
    data.column_mut(1).fill(4.5);
    CAPTURE.0.lock().unwrap().clear();
    let norm = Normalizer::fit_columns(data.view(), &[0, 1, 2, 3, 4, 5], &[0, 1, 2]).unwrap();
    norm.apply_in_place(&mut data).unwrap();
    let warnings = CAPTURE.0.lock().unwrap().clone();
    check!(data.column(1).iter().all(|&v| v == 0.0), "constant column not zeroed");
    check!(
        warnings.iter().any(|w| w.contains("constant")),
        "no warning for the constant column: {warnings:?}"
    );
    Ok(format!(
        "{} columns, max |mean| {worst_mean:.1e}, max |sd-1| {worst_sd:.1e}; constant column zeroed with warning",
        f.normalizer.columns.len()
    ))
}

fn naive_mse(y: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        s += (y[i] - p[i]) * (y[i] - p[i]);
    }
    s / y.len() as f64
}

fn naive_rmse(y: &[f64], p: &[f64]) -> f64 {
    naive_mse(y, p).sqrt()
}

fn naive_mae(y: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        s += (y[i] - p[i]).abs();
    }
    s / y.len() as f64
}

fn naive_r(y: &[f64], p: &[f64]) -> f64 {
    let n = y.len() as f64;
    let (mut sy, mut sp) = (0.0, 0.0);
    for i in 0..y.len() {
        sy += y[i];
        sp += p[i];
    }
    let (my, mp) = (sy / n, sp / n);
    let (mut cov, mut vy, mut vp) = (0.0, 0.0, 0.0);
    for i in 0..y.len() {
        cov += (y[i] - my) * (p[i] - mp);
        vy += (y[i] - my) * (y[i] - my);
        vp += (p[i] - mp) * (p[i] - mp);
    }
    cov / (vy * vp).sqrt()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..500);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| v + rng.random_range(-15.0..15.0)).collect();
        let pairs = [
            (rmse(&y, &p).unwrap(), naive_rmse(&y, &p)),
            (mae(&y, &p).unwrap(), naive_mae(&y, &p)),
            (pearson_r(&y, &p).unwrap(), naive_r(&y, &p)),
        ];
        for (got, want) in pairs {
            worst = worst.max(rel(got, want));
        }
        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(-50.0..50.0);
        let shifted: Vec<f64> = p.iter().map(|v| a * v + b).collect();
        let r0 = pearson_r(&y, &p).unwrap();
        let r1 = pearson_r(&y, &shifted).unwrap();
        check!((r0 - r1).abs() <= 1e-9, "r not affine invariant: {r0} vs {r1}");
    }
    check!(worst <= 1e-9, "metric relative error {worst:.3e}");

    let key = |loc: &str| RowKey {
        location_id: loc.into(),
        year: 2010,
        genotype_id: "G".into(),
        state: "IA".into(),
    };
    let report = aggregate_by_region(&[key("L1"), key("L2")], &[100.0, 100.0], &[90.0, 130.0]).unwrap();
    let pct = report.states[0].mean_error_pct;
    check!((pct - 20.0).abs() < 1e-12, "two-stage mean gave {pct}");
    Ok(format!(
        "100 vectors, max relative error {worst:.1e}; (10%, 30%) -> {pct}%"
    ))
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (n, p) = (rng.random_range(20..60), rng.random_range(2..8));
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let m = lasso_fit(x.view(), &y, 0.0, 1e-13, 200_000).map_err(|e| e.to_string())?;
        let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
        let beta = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * DVector::from_column_slice(&y)))
            .ok_or("singular normal equations")?;
        worst = worst.max((m.intercept - beta[0]).abs() / beta[0].abs().max(1.0));
        for j in 0..p {
            worst = worst.max((m.coefficients[j] - beta[j + 1]).abs() / beta[j + 1].abs().max(1.0));
        }
        for pair in m.objective_path.windows(2) {
            check!(
                pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0),
                "objective rose {:?}",
                pair
            );
        }
    }
    check!(worst <= 1e-6, "alpha=0 fit off normal equations by {worst:.3e}");

    let x = ndarray::array![[1.0], [-1.0]];
    let m = lasso_fit(x.view(), &[1.0, -1.0], 0.5, 1e-12, 1000).map_err(|e| e.to_string())?;
    let closed_form = m.coefficients[0];
    check!((closed_form - 0.5).abs() <= 1e-6, "closed form gave w={closed_form}");

    let x = Array2::from_shape_fn((30, 6), |_| rng.random_range(-2.0..2.0));
    let y: Vec<f64> = (0..30).map(|_| rng.random_range(-5.0..5.0)).collect();
    let m = lasso_fit(x.view(), &y, 0.05, 1e-10, 500).map_err(|e| e.to_string())?;
    for pair in m.objective_path.windows(2) {
        check!(
            pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0),
            "objective rose {:?}",
            pair
        );
    }
    let direct = lasso_objective(x.view(), &y, &m.coefficients, m.intercept, 0.05);
    check!(
        (direct - m.objective_path.last().unwrap()).abs() < 1e-9,
        "recorded objective disagrees with direct evaluation"
    );
    Ok(format!(
        "normal-equation max rel error {worst:.1e}; w = {closed_form:.6}"
    ))
}

fn importance_features() -> PreparedFeatures {
    let config = SyntheticConfig {
        locations: 50,
        years: 20,
        genotypes: 2,
        maturity_groups: 1,
        states: 5,
        signal: vec![
            SignalTerm::Location { scale: 5.0 },
            SignalTerm::WeatherPeriod {
                variable: WeatherVariable::Ap,
                period: 29,
                coefficient: 4.0,
            },
        ],
        noise_sd: 0.5,
        ..SyntheticConfig::default()
    };
    prepared(&config, 8, false)
}

fn ac8() -> Outcome {
    let f = importance_features();
    let n = f.matrix.n_rows();
    let genotypes = f.matrix.manifest.vocabulary(GROUP_GENOTYPE).unwrap().len();
    check!(
        n <= 2000 && genotypes <= 50,
        "{n} rows, {genotypes} genotypes exceed desk scale"
    );
    let net = Network::build(small_config(ArchitectureKind::CnnDnn), &f.matrix.manifest).unwrap();
    let config = TrainConfig {
        iterations: 3000,
        batch_size: 48,
        seed: 1,
        log_interval: 250,
        ..TrainConfig::default()
    };
    let (net, _) = train(net, &f.matrix, &f.split.train, &f.split.validation, &config).map_err(|e| e.to_string())?;
    let test = f.matrix.select_rows(&f.split.test);
    let groups: Vec<&str> = test.manifest.groups.iter().map(|g| g.name.as_str()).collect();
    let report = permutation_importance(&net, &test, &groups, 3, 1).map_err(|e| e.to_string())?;
    let change = |g: &str| report.get(g).unwrap().rmse_change;
    let planted = change("AP").min(change("location"));
    let (other, other_change) = report
        .groups
        .iter()
        .filter(|g| g.group != "AP" && g.group != "location")
        .map(|g| (g.group.clone(), g.rmse_change))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    check!(
        planted > other_change,
        "AP {:.3}, location {:.3}, but {other} {other_change:.3}",
        change("AP"),
        change("location")
    );
    let periods = per_period_importance(&net, &test, WeatherVariable::Ap, 3, 1).map_err(|e| e.to_string())?;
    let peak = periods.peak().unwrap();
    check!(peak == 29, "AP per-period importance peaks at {peak}");
    Ok(format!(
        "AP {:.2}, location {:.2}, next {other} {other_change:.2}; AP peak period {peak} (week {})",
        change("AP"),
        change("location"),
        yieldcast::analysis::approx_week(peak)
    ))
}

fn ac9() -> Outcome {
    let config = SyntheticConfig {
        locations: 8,
        years: 4,
        genotypes: 15,
        maturity_groups: 1,
        states: 3,
        signal: vec![
            SignalTerm::Location { scale: 4.0 },
            SignalTerm::Genotype { scale: 3.0 },
            SignalTerm::WeatherMean {
                variable: WeatherVariable::Ap,
                coefficient: 2.0,
            },
        ],
        genotypes_per_site: Some(6),
        noise_sd: 0.5,
        ..SyntheticConfig::default()
    };
    let f = prepared(&config, 9, false);
    let net = Network::build(small_config(ArchitectureKind::CnnDnn), &f.matrix.manifest).unwrap();
    let tc = TrainConfig {
        iterations: 300,
        batch_size: 32,
        seed: 2,
        log_interval: 100,
        ..TrainConfig::default()
    };
    let (net, _) = train(net, &f.matrix, &f.split.train, &f.split.validation, &tc).map_err(|e| e.to_string())?;
    let ctx = SelectionContext::from_matrix(&f.matrix).map_err(|e| e.to_string())?;
    let vocab = f.matrix.manifest.vocabulary(GROUP_GENOTYPE).unwrap().to_vec();
    let geno = f.matrix.manifest.group(GROUP_GENOTYPE).unwrap().clone();

    let mut sites: BTreeMap<(String, i32), usize> = BTreeMap::new();
    for (i, key) in f.matrix.rows.iter().enumerate() {
        sites.entry((key.location_id.clone(), key.year)).or_insert(i);
    }
    let mut keys: Vec<_> = sites.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    keys.shuffle(&mut rng);
    for ((loc, year), row) in keys.into_iter().take(20) {
        let k = rng.random_range(1..=vocab.len());
        let mut candidates = f.matrix.select_rows(&vec![row; vocab.len()]);
        for (g, mut r) in candidates.values.rows_mut().into_iter().enumerate() {
            for c in geno.columns() {
                r[c] = 0.0;
            }
            r[geno.start + g] = 1.0;
        }
        let preds = YieldModel::predict(&net, &candidates).unwrap();
        let mut order: Vec<usize> = (0..vocab.len()).collect();
        order.sort_by(|&a, &b| preds[b].partial_cmp(&preds[a]).unwrap().then(a.cmp(&b)));
        let expected: Vec<(String, f64)> = order[..k].iter().map(|&i| (vocab[i].clone(), preds[i])).collect();

        let got = select_top_genotypes(&net, &ctx, &loc, year, k).map_err(|e| e.to_string())?;
        let again = select_top_genotypes(&net, &ctx, &loc, year, k).map_err(|e| e.to_string())?;
        check!(got == again, "{loc}/{year}: selection not deterministic");
        check!(
            got.ranked == expected,
            "{loc}/{year} k={k}: {:?} vs {:?}",
            got.ranked,
            expected
        );
        let mean = expected.iter().map(|(_, p)| p).sum::<f64>() / k as f64;
        check!(
            (got.top_k_mean - mean).abs() < 1e-9,
            "{loc}/{year}: top-k mean {}",
            got.top_k_mean
        );
    }

    let fixture = GenotypeRanking {
        location_id: "L1".into(),
        year: 2015,
        state: "IA".into(),
        k: 10,
        ranked: (0..10).map(|i| (format!("G{i}"), 55.0 + i as f64 - 4.5)).collect(),
        top_k_mean: 60.0,
        observed: vec![45.0, 55.0],
    };
    let gaps = genotype_gap_report(&[fixture]);
    check!(
        gaps.len() == 1 && (gaps[0].mean_gap - 10.0).abs() < 1e-12,
        "gap fixture gave {gaps:?}"
    );
    Ok(format!(
        "20 location-years match brute-force ranking over {} genotypes; gap fixture = {}",
        vocab.len(),
        gaps[0].mean_gap
    ))
}

const PIPELINE: &[&[&str]] = &[
    &["ingest"],
    &["preprocess"],
    &["train", "--arch", "cnn-dnn"],
    &["train", "--arch", "cnn-lstm-dnn"],
    &["train", "--arch", "lasso"],
    &["ensemble"],
    &["evaluate"],
    &["importance"],
    &["select-genotypes", "--k", "10"],
];

const ARTIFACTS: &[&str] = &[
    "dataset.json",
    "validation_report.jsonl",
    "features.ycfm",
    "models/cnn-dnn.ycnn",
    "models/cnn-dnn_history.csv",
    "models/cnn-lstm-dnn.ycnn",
    "models/cnn-lstm-dnn_history.csv",
    "models/lasso.json",
    "ensemble_weights.json",
    "metrics.csv",
    "region_errors.csv",
    "importance.csv",
    "importance_periods.csv",
    "genotype_rankings.csv",
    "genotype_gaps.csv",
];

fn run_pipeline(config: &Path, out: &Path) -> Result<(), String> {
    for args in PIPELINE {
        let o = Command::new(env!("CARGO_BIN_EXE_yieldcast"))
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(out)
            .args(*args)
            .output()
            .map_err(|e| e.to_string())?;
        check!(
            o.status.success(),
            "{} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&o.stderr).trim()
        );
    }
    Ok(())
}

fn ac10() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.toml");
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(&config, a.path())?;
    run_pipeline(&config, b.path())?;
    for name in ARTIFACTS {
        let first = std::fs::read(a.path().join(name)).map_err(|_| format!("{name} was not written"))?;
        let second = std::fs::read(b.path().join(name)).map_err(|_| format!("{name} was not written on rerun"))?;
        check!(first == second, "{name} differs between runs");
    }
    Ok(format!(
        "{} commands, {} artifacts, rerun byte-identical",
        PIPELINE.len(),
        ARTIFACTS.len()
    ))
}

fn ac11() -> Option<Outcome> {
    let config = std::env::var_os("YIELDCAST_COMPETITION_CONFIG")?;
    let out = tempfile::tempdir().expect("tempdir");
    Some(run_pipeline(Path::new(&config), out.path()).and_then(|()| {
        let metrics = std::fs::read_to_string(out.path().join("metrics.csv")).map_err(|e| e.to_string())?;
        let line = metrics
            .lines()
            .find(|l| l.starts_with("gem,test,"))
            .ok_or("metrics.csv has no gem,test row")?;
        let rmse: f64 = line
            .split(',')
            .nth(2)
            .and_then(|v| v.parse().ok())
            .ok_or("bad rmse field")?;
        let target = 6.67;
        check!(
            (rmse - target).abs() <= 0.15 * target,
            "GEM test RMSE {rmse:.3} outside 15% of {target}"
        );
        Ok(format!("GEM test RMSE {rmse:.3} vs {target}"))
    }))
}
