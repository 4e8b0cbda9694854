//! Configuration, orchestration, persistence and self-checks for the
//! projective-flow simulator.

pub mod checks;
pub mod config;
pub mod ensemble;
pub mod io;
pub mod scenarios;
pub mod seed;

pub use config::{parse_config, ConfigError, RunConfig, Scenario};
pub use seed::derive_seed;
