//! Permutation feature importance and genotype-by-environment selection.

mod importance;
mod model;
mod selection;

pub use importance::{
    approx_week, per_period_importance, permutation_importance, GroupImportance, ImportanceReport, PeriodChange,
    PeriodImportance,
};
pub use model::{LinearModel, WeightedEnsemble, YieldModel};
pub use selection::{
    gap_csv, genotype_gap_report, rankings_csv, select_top_genotypes, write_selection_csvs, GapRow, GenotypeRanking,
    SelectionContext,
};
