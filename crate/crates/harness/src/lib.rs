//! Configuration, orchestration, metrics and file outputs for
//! preference-guided distillation experiments.

pub mod config;
pub mod error;
pub mod experiment;
pub mod metric;
pub mod snapshot;
pub mod trace;

pub use config::{parse_config, ConfigError, ExperimentConfig, RawConfig};
pub use error::{HarnessError, Result};
