//! Experiment harness for covariance-based multi-cell activity detection:
//! Monte-Carlo orchestration, detection metrics, solver benchmarking, and
//! deterministic CSV persistence. The `covdet` binary exposes these as
//! subcommands.

pub mod bench;
pub mod config;
pub mod csvio;
pub mod metrics;
pub mod montecarlo;
pub mod normexp;
pub mod presets;
