//! Training loops, experiments and empirical checks of the interval theory.
pub mod experiments;
pub mod output;
pub mod parallel;
pub mod theory;
pub mod train;
pub mod tuning;

pub use experiments::{ablation_suite, robustness_suite, shift_matrix, split_experiment};
pub use train::{evaluate, predict, train, train_baseline, train_qpignn, LossKind, RunRecord, SplitMetrics, TrainConfig};
pub use tuning::{lambda_sweep, lambda_tune, SweepResult};
