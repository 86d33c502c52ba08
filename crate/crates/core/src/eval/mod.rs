//! Cross-validation, AUC, confounded test subsets and the experiment runner.

mod auc;
mod experiment;
mod folds;
mod report;
mod subset;

pub use auc::auc;
pub use experiment::{
    derive_seed, run_experiment, DataSource, ExperimentConfig, GroupingSpec, Method, MethodSpec,
};
pub use folds::{make_folds, FoldPlan};
pub use report::{summarize, CellOutcome, ExperimentReport, Summary, TestSetKind};
pub use subset::{cell_counts, cell_index, confounded_test_subset, largest_feasible, largest_remainder, CELLS};
