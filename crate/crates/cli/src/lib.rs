//! Command-line workflows over the `augsc` library: single runs with repeated
//! trials, `(lambda, k)` sweeps, synthetic data generation and label scoring.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

pub use commands::{cmd_cluster, cmd_eval, cmd_sweep, cmd_synth, format_metrics};
pub use config::{DataSource, RunConfig};
pub use error::{CliError, CliResult};
pub use report::{RunReport, SweepReport};
