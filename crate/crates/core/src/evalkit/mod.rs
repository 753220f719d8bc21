//! Experiment drivers and statistics: the data-efficiency sweep, the
//! training-time-to-target experiment and improvement summaries.

mod plan;
mod stats;
mod table;

pub use plan::{
    finish_epoch, run_data_efficiency, run_training_time, subset_splits, CompiledInit, ExperimentPlan, FinetuneTrainer, FixedInit, Initializer, RandomInit,
    TrainOutcome, Trainer, TrainingTimeResults, TrialResult, SIZE_GRID, TARGET_EPOCHS, TIMEOUT_EPOCHS, TRIALS,
};
pub use stats::{geomean, mean, mpi, percentile, percentile_summary, PercentileSummary};
pub use table::{summarize, GroupStats, ImprovementEntry, ImprovementTable, MethodSummary, Summary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no values to aggregate")]
    Empty,
    #[error("ratio {0} is not positive")]
    NonPositive(f64),
}
