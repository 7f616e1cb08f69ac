//! Config-driven studies and report emission.

pub mod config;
pub mod report;
pub mod studies;

pub use config::ExperimentConfig;
pub use report::{emit_report, ExperimentReport, Table, Verdict};
pub use studies::{
    run_cell, run_noise_check, run_semigroup_study, run_simulate, run_thm1_convergence, run_variance_study,
    VarianceTarget,
};
