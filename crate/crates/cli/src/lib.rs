//! Config-driven runner for the catqrm scenarios.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{build, echo, parse_config, ConfigError, Format, Request, Scenario, ScenarioConfig};
