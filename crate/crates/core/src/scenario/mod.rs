//! Scenario files, built-in presets and run outputs.
//!
//! A scenario file is TOML with sections `[signal]`, `[payoff]`,
//! `[observation]`, `[strategy]` and `[simulation]`, plus an optional
//! top-level `preset`. With a preset, each model section given in the file
//! replaces the preset's section and `[simulation]` keys override one by one.

mod config;
mod output;
pub mod presets;

pub use config::{ConfigError, RawConfig, ScenarioConfig, DEFAULT_TILT_GRID};
pub use output::{
    curve_csv, meta_text, parse_curve_csv, write_outputs, SchemaError, COLUMNS, EXPANDING_TOLERANCE, SCHEMA_VERSION,
};

use crate::sim::SimError;

/// Everything that can stop a scenario run, grouped by exit status.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("validation error: {0}")]
    Model(#[from] SimError),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl ScenarioError {
    /// 1 for malformed config, 2 for rejected model values, 3 for failures
    /// while running or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 1,
            ScenarioError::Model(SimError::Pool(_)) | ScenarioError::Runtime(_) => 3,
            ScenarioError::Model(_) => 2,
        }
    }
}
