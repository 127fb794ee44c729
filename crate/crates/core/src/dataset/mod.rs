//! Ingestion and validation of performance records and daily weather, plus
//! seeded synthetic datasets with a recorded ground truth.

mod join;
mod records;
mod synthetic;
mod weather;

pub use join::{
    join_and_validate, JoinedDataset, Severity, ValidationMode, ValidationReport, Violation, ViolationKind,
    Vocabularies,
};
pub use records::{load_performance_records, write_performance_records, PerformanceRecord, RecordSchema};
pub use synthetic::{generate_synthetic, GroundTruth, SignalTerm, SyntheticConfig, SyntheticDataset};
pub use weather::{
    load_weather, load_weather_files, write_weather, WeatherKey, WeatherSeries, WeatherTable, WeatherVariable,
    SEASON_DAYS,
};
