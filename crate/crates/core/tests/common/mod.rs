#![allow(dead_code)]

use yieldcast::dataset::{generate_synthetic, SignalTerm, SyntheticConfig, WeatherVariable};
use yieldcast::models::{ArchitectureConfig, ArchitectureKind, ConvSpec, DropoutConfig};
use yieldcast::preprocess::{prepare, BuildOptions, PreparedFeatures, DEFAULT_RATIOS};

pub fn prepared(config: &SyntheticConfig, seed: u64, options: BuildOptions) -> PreparedFeatures {
    let data = generate_synthetic(config, seed).unwrap();
    prepare(&data.dataset, options, DEFAULT_RATIOS, seed).unwrap()
}

/// 5 locations, 3 years, 10 genotypes, 2 maturity groups: 20 one-hot columns.
pub fn default_features() -> PreparedFeatures {
    prepared(&SyntheticConfig::default(), 1, BuildOptions::default())
}

/// 8 locations x 2 years x 4 genotypes = 64 rows with large categorical effects.
pub fn overfit_features() -> PreparedFeatures {
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
        ..SyntheticConfig::default()
    };
    prepared(&config, 5, BuildOptions::default())
}

/// A narrow network that trains quickly at desk scale.
pub fn small_config(kind: ArchitectureKind) -> ArchitectureConfig {
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
