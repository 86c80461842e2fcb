//! Experiment harness: configuration, the four experiment families, sweeps
//! and artifact output.

pub mod config;
pub mod harness;

pub use config::{
    parse_sweep_values, sweep_configs, ExperimentConfig, SweepSection, SweepValues, EXPERIMENTS,
};
pub use harness::{
    execute, nse_run, run_experiment, sweep, sweep_in_memory, Check, Outcome, SweepRow, SweepTable,
    EXIT_CONFIG, EXIT_FAIL, EXIT_PASS,
};
