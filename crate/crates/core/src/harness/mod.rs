//! Synthetic data, experiment configuration, verification suites and reports.

mod config;
mod generators;
mod report;
mod suites;

pub use config::{ExperimentConfig, ExperimentKind};
pub use generators::{generate_low_multirank_tensor, generate_preference_tensor, REJECTION_BUDGET};
pub use report::{emit_report, Check, ReportFormat, RunReport};
pub use suites::{orthogonality_defect, run_experiment, run_suite, tol, trial_rng, SUITES};
