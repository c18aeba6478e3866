//! Experiment configuration and the command implementations behind the
//! `ietagc` binary.

pub mod commands;
pub mod config;

pub use commands::{
    audit_run, cmd_analyze, cmd_audit, cmd_compare, cmd_gen_data, cmd_run, cmd_train, exit_code,
    load_report, materialize, memorized_split, rerun, sweep, AnalysisSummary, Comparison, Manifest,
};
pub use config::{DataSource, ExperimentSpec};
