use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("iteration budget must be at least 1")]
    ZeroBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub saliency_threshold: f64,
    pub janus_threshold: f64,
    pub iteration_budget: u32,
    /// Reserved; every mode is deterministic.
    pub seed: u64,
    pub output: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            saliency_threshold: 0.5,
            janus_threshold: 0.4,
            iteration_budget: 16,
            seed: 0,
            output: OutputFormat::Json,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in
            [("saliency_threshold", self.saliency_threshold), ("janus_threshold", self.janus_threshold)]
        {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::OutOfRange { name, value });
            }
        }
        if self.iteration_budget == 0 {
            return Err(ConfigError::ZeroBudget);
        }
        Ok(())
    }
}
