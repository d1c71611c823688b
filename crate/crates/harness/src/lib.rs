//! Experiment orchestration for communication-free Nash equilibrium learning:
//! configs, seeded multi-run execution, seed aggregation, CSV artifacts, SVG
//! plots and the `nashseek` command line.

pub mod aggregate;
pub mod artifacts;
pub mod bias_variance;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod targets;

pub use aggregate::{aggregate_seeds, MeanCurve};
pub use config::{Algorithm, ExperimentConfig, GameKind};
pub use error::{HarnessError, Result};
pub use experiment::{execute, run_experiment, sweep, ExperimentOutcome, ExperimentSummary};
