//! Configuration, runs and artifacts behind the `swimctl` binary.

pub mod artifacts;
pub mod config;
pub mod run;

pub use config::{ConfigError, Resolved, RunConfig};
pub use run::{evaluate, optimize, Flags, Outcome, Report};
